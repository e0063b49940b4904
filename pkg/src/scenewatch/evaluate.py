"""Scoring against ground truth and throughput benchmarking.

Matching is greedy by descending IoU.  Counts with an empty denominator
score 1.0 so that an empty scene with no predictions is perfect.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .boxes import iou
from .detect import Detection, read_exchange


@dataclass(frozen=True)
class DetMetrics:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 1.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 1.0

    @property
    def f1(self) -> float:
        return f1_score(self.precision, self.recall)


def f1_score(precision: float, recall: float) -> float:
    s = precision + recall
    return 0.0 if s == 0 else 2.0 * precision * recall / s


@dataclass(frozen=True)
class TrackMetrics:
    tp: int
    fp: int
    fn: int
    id_switches: int
    gt_count: int
    mostly_tracked_fraction: float

    @property
    def mota(self) -> float:
        # an empty ground truth divides by one so that mota stays <= 1
        return 1.0 - (self.fn + self.fp + self.id_switches) / max(self.gt_count, 1)

    @property
    def det(self) -> DetMetrics:
        return DetMetrics(self.tp, self.fp, self.fn)

    @property
    def precision(self) -> float:
        return self.det.precision

    @property
    def recall(self) -> float:
        return self.det.recall

    @property
    def f1(self) -> float:
        return self.det.f1


@dataclass
class BenchReport:
    frames: int
    threads: int
    stage_ms: dict = field(default_factory=dict)
    total_ms: float = 0.0

    @property
    def fps(self) -> float:
        return self.frames / (self.total_ms / 1e3) if self.total_ms > 0 else 0.0


def match_frame(gt, pred, iou_min: float = 0.5):
    """Greedy one-to-one matching of two box lists from the same frame.

    Returns ``(tp, fp, fn, pairs)`` where ``pairs`` holds ``(gt_idx, pred_idx)``.
    Ties in IoU are broken by gt index, then pred index.
    """
    cand = []
    for i, g in enumerate(gt):
        for j, p in enumerate(pred):
            ov = iou(g, p)
            if ov >= iou_min and ov > 0.0:
                cand.append((-ov, i, j))
    cand.sort()
    used_g, used_p, pairs = set(), set(), []
    for _, i, j in cand:
        if i in used_g or j in used_p:
            continue
        used_g.add(i)
        used_p.add(j)
        pairs.append((i, j))
    tp = len(pairs)
    return tp, len(pred) - tp, len(gt) - tp, pairs


def det_metrics(counts) -> DetMetrics:
    """Aggregate ``(tp, fp, fn)`` triples (or :class:`DetMetrics`)."""
    tp = fp = fn = 0
    for c in counts:
        a, b, d = (c.tp, c.fp, c.fn) if isinstance(c, DetMetrics) else c[:3]
        tp, fp, fn = tp + a, fp + b, fn + d
    return DetMetrics(tp, fp, fn)


def _by_frame(rows) -> dict[int, list[Detection]]:
    if isinstance(rows, (str, Path)):
        rows = read_exchange(rows)
    out: dict[int, list[Detection]] = {}
    for d in rows:
        out.setdefault(d.frame, []).append(d)
    return out


def detection_metrics(gt, pred, iou_min: float = 0.5) -> DetMetrics:
    """Per-frame matching of exchange rows (paths or Detection lists), ids ignored."""
    g, p = _by_frame(gt), _by_frame(pred)
    counts = []
    for f in sorted(set(g) | set(p)):
        tp, fp, fn, _ = match_frame([d.box for d in g.get(f, [])], [d.box for d in p.get(f, [])], iou_min)
        counts.append((tp, fp, fn))
    return det_metrics(counts)


def track_metrics(gt, pred, iou_min: float = 0.5, mostly_tracked: float = 0.8) -> TrackMetrics:
    """Identity-aware scores; ``gt``/``pred`` are exchange paths or Detection lists.

    An id switch is counted whenever a ground-truth identity is matched to a
    different predicted id than at its previous match.
    """
    g, p = _by_frame(gt), _by_frame(pred)
    for rows, name in ((g, "gt"), (p, "pred")):
        for dets in rows.values():
            if any(d.track_id < 0 for d in dets):
                raise ValueError(f"{name} rows need track ids >= 0")
    tp = fp = fn = idsw = total = 0
    last: dict[int, int] = {}
    seen: dict[int, int] = {}
    hit: dict[int, int] = {}
    for f in sorted(set(g) | set(p)):
        gs, ps = g.get(f, []), p.get(f, [])
        a, b, c, pairs = match_frame([d.box for d in gs], [d.box for d in ps], iou_min)
        tp, fp, fn, total = tp + a, fp + b, fn + c, total + len(gs)
        for d in gs:
            seen[d.track_id] = seen.get(d.track_id, 0) + 1
        for i, j in pairs:
            gid, pid = gs[i].track_id, ps[j].track_id
            hit[gid] = hit.get(gid, 0) + 1
            if gid in last and last[gid] != pid:
                idsw += 1
            last[gid] = pid
    mt = sum(1 for gid, n in seen.items() if hit.get(gid, 0) >= mostly_tracked * n)
    return TrackMetrics(tp, fp, fn, idsw, total, mt / len(seen) if seen else 1.0)


def bench(input_path, config=None, threads: int = 1, out_dir=None, frames=None) -> BenchReport:
    """Run the full pipeline and report per-stage and total wall time.

    Frames are decoded up front so decoding is not part of the timing.
    """
    from .config import PipelineConfig
    from .frame_io import open_input
    from .pipeline import Pipeline

    config = config or PipelineConfig()
    if frames is None:
        source, it = open_input(input_path, config.input.frame_rate)
        frames = list(it)
        rate = source.frame_rate
    else:
        rate = config.input.frame_rate
    if not frames:
        return BenchReport(0, threads)
    h, w = frames[0].shape
    tmp = None
    if out_dir is None:
        tmp = tempfile.TemporaryDirectory(prefix="bench_")
        out_dir = tmp.name
    try:
        summary = Pipeline(config, out_dir, w, h, rate, Path(str(input_path)).name,
                           threads=threads).run(frames)
    finally:
        if tmp is not None:
            tmp.cleanup()
    return BenchReport(summary.frames, threads, dict(summary.stage_ms), summary.total_ms)
