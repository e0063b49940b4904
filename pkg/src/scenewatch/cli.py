"""Command-line front end: synth, process, search, eval, bench.

Exit status is 0 on success, 1 on a usage error and 2 when input data or
configuration is malformed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, PipelineConfig
from .detect import DetectionFormatError, load_external_detections
from .evaluate import bench, detection_metrics, track_metrics
from .frame_io import FormatError, open_input
from .pipeline import STAGES, Pipeline
from .store import ChecksumError, IndexFormatError, QueryFilter, query
from .synth import PRESETS, preset, spec_from_ini, write_scene

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
_DATA_ERRORS = (FormatError, DetectionFormatError, IndexFormatError, ConfigError,
                ChecksumError, OSError, ValueError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _config(path) -> PipelineConfig:
    return PipelineConfig.load(path) if path else PipelineConfig()


def _cmd_synth(args) -> int:
    if args.scene:
        spec = spec_from_ini(Path(args.scene).read_text(encoding="utf-8"))
    elif args.preset:
        spec = preset(args.preset)
    else:
        raise UsageError("synth: give --preset NAME or --scene FILE")
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.no_occluders:
        spec = spec.without_occluders()
    gt = write_scene(spec, args.out)
    print(f"frames={spec.n_frames} objects={len(spec.objects)} "
          f"activity_intervals={len(gt.activity_intervals)} out={args.out}")
    return EXIT_OK


def _cmd_process(args) -> int:
    cfg = _config(args.config)
    source, frames = open_input(args.input, cfg.input.frame_rate)
    external = load_external_detections(args.detections) if args.detections else None
    pipe = Pipeline(cfg, args.out, source.width, source.height, source.frame_rate,
                    Path(args.input).name, external, args.threads,
                    True if args.save_masks else None)
    s = pipe.run(frames)
    print(f"frames={s.frames} clips={len(s.clips)} events={s.events} "
          f"index={Path(args.out) / 'events.jsonl'}")
    return EXIT_OK


def _cmd_search(args) -> int:
    time_range = None
    if args.t_from is not None or args.t_to is not None:
        lo = args.t_from if args.t_from is not None else 0
        hi = args.t_to if args.t_to is not None else 2 ** 63 - 1
        if lo > hi:
            raise UsageError("search: --from must not exceed --to")
        time_range = (lo, hi)
    flt = QueryFilter(time_range=time_range, class_label=args.class_label,
                      activity_label=args.activity, kind=args.kind)
    for rec in query(args.index, flt):
        print(rec.to_json())
    return EXIT_OK


def _report(pairs, json_path) -> None:
    for k, v in pairs:
        print(f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}")
    if json_path:
        Path(json_path).write_text(json.dumps(dict(pairs), indent=1) + "\n", encoding="utf-8")


def _cmd_eval(args) -> int:
    if args.ids:
        m = track_metrics(args.gt, args.pred, args.iou)
        pairs = [("tp", m.tp), ("fp", m.fp), ("fn", m.fn), ("precision", m.precision),
                 ("recall", m.recall), ("f1", m.f1), ("id_switches", m.id_switches),
                 ("mota", m.mota), ("mostly_tracked", m.mostly_tracked_fraction)]
    else:
        m = detection_metrics(args.gt, args.pred, args.iou)
        pairs = [("tp", m.tp), ("fp", m.fp), ("fn", m.fn), ("precision", m.precision),
                 ("recall", m.recall), ("f1", m.f1)]
    _report(pairs, args.json)
    return EXIT_OK


def _cmd_bench(args) -> int:
    rep = bench(args.input, _config(args.config), args.threads)
    pairs = [("frames", rep.frames), ("threads", rep.threads), ("fps", rep.fps),
             ("total_ms", rep.total_ms)]
    pairs += [(f"{s}_ms", rep.stage_ms.get(s, 0.0)) for s in STAGES]
    _report(pairs, args.json)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="scenewatch", description="Motion-triggered video analysis.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="render a synthetic scene with ground truth")
    p.add_argument("--preset", choices=PRESETS, help="canonical scene name")
    p.add_argument("--scene", help="scene description file (INI)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the scene noise seed")
    p.add_argument("--no-occluders", action="store_true", help="drop all occluders")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("process", help="segment, detect, track and index a video")
    p.add_argument("--input", required=True, help="PGM directory or .y4m file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="pipeline configuration file (INI)")
    p.add_argument("--detections", help="external detections in the exchange format")
    p.add_argument("--save-masks", action="store_true", help="write cleaned foreground masks")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--seed", type=int, default=0,
                   help="accepted for reproducibility records; processing is deterministic")
    p.set_defaults(func=_cmd_process)

    p = sub.add_parser("search", help="query an event index")
    p.add_argument("--index", required=True, help="events.jsonl file")
    p.add_argument("--from", dest="t_from", type=int, help="range start, ms")
    p.add_argument("--to", dest="t_to", type=int, help="range end, ms")
    p.add_argument("--class", dest="class_label", help="exact object class")
    p.add_argument("--activity", help="exact activity label")
    p.add_argument("--kind", choices=("clip", "track", "activity"), help="record kind")
    p.set_defaults(func=_cmd_search)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth exchange file")
    p.add_argument("--pred", required=True, help="predicted exchange file")
    p.add_argument("--iou", type=float, default=0.5, help="match threshold (default 0.5)")
    p.add_argument("--ids", action="store_true", help="identity-aware tracking metrics")
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("bench", help="time the full pipeline")
    p.add_argument("--input", required=True, help="PGM directory or .y4m file")
    p.add_argument("--config", help="pipeline configuration file (INI)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    p.add_argument("--json", help="also write the report as JSON")
    p.set_defaults(func=_cmd_bench)
    return ap


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be >= 1")
        if args.command == "eval" and not 0 < args.iou <= 1:
            raise UsageError("--iou must be in (0, 1]")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"scenewatch: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
