"""End-to-end processing: frames in, clips + event index + track file out.

Frames are handled in small batches.  Within a batch the data-parallel
work fans out over the worker pool: the GMM runs as one sequential task
(its state is order dependent) while the optical flow of every frame pair
runs as independent tasks; mask cleanup and blob detection then run per
frame.  Segmentation, tracking, activity labelling and storage consume the
results strictly in frame order, so the output never depends on the
thread count.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .activity import ActivityMonitor
from .background import GmmModel
from .config import PipelineConfig
from .detect import ContextPrior, Detection, contextual_filter, detect_multiscale, merge_detections, write_exchange
from .flow import flow_mask, lk_flow
from .frame_io import Frame, save_pgm, timestamp_ms
from .motionseg import SegmenterState, activity_score, flush, fuse_masks, morph_clean, segmenter_step
from .parallel import Workers
from .store import ClipManifest, ClipWriter, EventIndex, EventRecord
from .track import Tracker

STAGES = ("background", "flow", "motionseg", "detect", "track", "activity", "store")
BATCH = 16


@dataclass
class RunSummary:
    frames: int = 0
    clips: list = field(default_factory=list)  # ClipManifest per clip
    events: int = 0
    stage_ms: dict = field(default_factory=lambda: {s: 0.0 for s in STAGES})
    total_ms: float = 0.0
    threads: int = 1


def _box_list(box):
    return None if box is None else [round(float(v), 2) for v in box]


def paint_boxes(mask: np.ndarray, dets) -> np.ndarray:
    """OR the (clipped) detection rectangles into a copy of ``mask``."""
    out = mask.copy()
    h, w = mask.shape
    for d in dets:
        x, y, bw, bh = d.box
        x0, y0 = max(int(np.floor(x)), 0), max(int(np.floor(y)), 0)
        x1, y1 = min(int(np.ceil(x + bw)), w), min(int(np.ceil(y + bh)), h)
        if x1 > x0 and y1 > y0:
            out[y0:y1, x0:x1] = True
    return out


class Pipeline:
    """Streaming processor for one input; see :meth:`run`."""

    def __init__(self, config: PipelineConfig, out_dir, width: int, height: int,
                 frame_rate: float | None = None, source: str = "",
                 external: dict | None = None, threads: int = 1, save_masks: bool | None = None):
        self.cfg = config
        self.out = Path(out_dir)
        self.width, self.height = width, height
        self.rate = frame_rate or config.input.frame_rate
        self.source = config.input.source or source
        self.external = external or {}
        self.threads = threads
        self.save_masks = config.output.save_masks if save_masks is None else save_masks
        seg = config.segmenter
        self.min_area = seg.scaled_min_area(width, height)
        det = config.detect
        self.prior = ContextPrior(self.min_area, det.max_area_fraction,
                                  (det.aspect_min, det.aspect_max), det.border_band)
        self.seg_params = seg.segmenter()

    # ------------------------------------------------------------ per frame

    def _mask_and_detect(self, frame: Frame, bg: np.ndarray, fl: np.ndarray | None):
        t0 = time.perf_counter()
        fused = bg if fl is None else fuse_masks(bg, fl, self.cfg.segmenter.fusion)
        ext = self.external.get(frame.index, [])
        if ext:
            fused = paint_boxes(fused, ext)
        clean = morph_clean(fused)
        score = activity_score(clean)
        t1 = time.perf_counter()
        d = self.cfg.detect
        blobs = detect_multiscale(clean, d.levels, self.min_area, d.iou_threshold, frame.index)
        dets = merge_detections(blobs, ext, self.prior, (self.width, self.height))
        t2 = time.perf_counter()
        return clean, score, dets, (t1 - t0) * 1e3, (t2 - t1) * 1e3

    # ------------------------------------------------------------------ run

    def run(self, frames) -> RunSummary:
        self.out.mkdir(parents=True, exist_ok=True)
        summary = RunSummary(threads=self.threads)
        st = summary.stage_ms
        cfg = self.cfg
        gmm = GmmModel(self.width, self.height, cfg.background)
        tracker = Tracker(cfg.track)
        monitor = ActivityMonitor((self.width, self.height), cfg.activity)
        state = SegmenterState(self.seg_params)
        p = self.seg_params
        ring: deque = deque(maxlen=p.pre_roll + p.n_on)
        pending: deque = deque()
        writer: ClipWriter | None = None
        clips: list[list] = []  # [clip_id, start, end or None]
        track_rows: list[Detection] = []
        det_rows: list[Detection] = []
        # each run starts a fresh index; the index itself is append-only
        (self.out / "events.jsonl").unlink(missing_ok=True)
        index = EventIndex(self.out / "events.jsonl")
        if self.save_masks:
            (self.out / "masks").mkdir(exist_ok=True)
        clips_root = self.out / "clips"

        def ms(frame_idx):
            return timestamp_ms(frame_idx, self.rate)

        def clip_for(f0, f1):
            for cid, a, b in clips:
                if a <= f1 and (b is None or f0 <= b):
                    return cid
            return -1

        def emit(rec):
            index.append(rec)
            summary.events += 1

        def commit(upto):
            while pending and pending[0].index <= upto:
                f = pending.popleft()
                if cfg.output.write_clips:
                    writer.add(f)

        def retire(tracks):
            for t in sorted(tracks, key=lambda t: t.id):
                if t.confirmed_frame < 0:
                    continue
                ta = time.perf_counter()
                acts = monitor.finish(t)
                tb = time.perf_counter()
                st["activity"] += (tb - ta) * 1e3
                matched = [h for h in t.history if not h[2]]
                f0, f1 = matched[0][0], matched[-1][0]
                emit(EventRecord("track", clip_for(f0, f1), t.id, f0, f1, ms(f0), ms(f1),
                                 t.class_label, "", _box_list(matched[0][1]),
                                 _box_list(matched[-1][1]), self.source))
                emit_acts(acts, {t.id: t.class_label})
                st["store"] += (time.perf_counter() - tb) * 1e3

        def emit_acts(acts, labels):
            for tid, label, a, b, box_a, box_b in acts:
                emit(EventRecord("activity", clip_for(a, b), tid, a, b, ms(a), ms(b),
                                 labels.get(tid, ""), label, _box_list(box_a), _box_list(box_b),
                                 self.source))

        def close_clip(end):
            nonlocal writer
            commit(end)
            pending.clear()
            cid, start = clips[-1][0], clips[-1][1]
            clips[-1][2] = end
            if cfg.output.write_clips:
                summary.clips.append(writer.close())
            else:
                summary.clips.append(ClipManifest(cid, start, end, ()))
            writer = None
            emit(EventRecord("clip", cid, -1, start, end, ms(start), ms(end), "", "",
                             None, None, self.source))

        prev = None
        t_start = time.perf_counter()
        with Workers(self.threads) as pool:
            it = iter(frames)
            while True:
                batch = []
                for f in it:
                    if f.shape != (self.height, self.width):
                        raise ValueError(f"frame {f.index} is {f.width}x{f.height}, "
                                         f"expected {self.width}x{self.height}")
                    batch.append(f)
                    if len(batch) == BATCH:
                        break
                if not batch:
                    break

                # background and flow in parallel
                def run_gmm(batch=batch):
                    t = time.perf_counter()
                    masks = [gmm.apply(f) for f in batch]
                    return masks, (time.perf_counter() - t) * 1e3

                def run_flow(pair):
                    a, b = pair
                    if a is None:
                        return None, 0.0
                    t = time.perf_counter()
                    m = flow_mask(lk_flow(a, b, cfg.flow), cfg.flow.magnitude_threshold)
                    return m, (time.perf_counter() - t) * 1e3

                tw = time.perf_counter()
                gmm_job = pool.submit(run_gmm)
                pairs = list(zip([prev] + batch[:-1], batch))
                flows = pool.map(run_flow, pairs)
                bg_masks, bg_ms = gmm_job.result()
                prev = batch[-1]
                if self.threads == 1:
                    st["background"] += bg_ms
                    st["flow"] += sum(ms_ for _, ms_ in flows)
                else:
                    # overlapped: attribute the phase wall time in proportion to work
                    wall = (time.perf_counter() - tw) * 1e3
                    work = bg_ms + sum(ms_ for _, ms_ in flows) or 1.0
                    st["background"] += wall * bg_ms / work
                    st["flow"] += wall * (work - bg_ms) / work

                tw = time.perf_counter()
                per_frame = pool.map(lambda k: self._mask_and_detect(batch[k], bg_masks[k], flows[k][0]),
                                     range(len(batch)))
                if self.threads == 1:
                    st["motionseg"] += sum(r[3] for r in per_frame)
                    st["detect"] += sum(r[4] for r in per_frame)
                else:
                    wall = (time.perf_counter() - tw) * 1e3
                    work = sum(r[3] + r[4] for r in per_frame) or 1.0
                    st["motionseg"] += wall * sum(r[3] for r in per_frame) / work
                    st["detect"] += wall * sum(r[4] for r in per_frame) / work

                # order-dependent stages
                for frame, (clean, score, dets, _, _) in zip(batch, per_frame):
                    t0 = time.perf_counter()
                    ring.append(frame)
                    was_recording = state.mode == "recording"
                    state, ev = segmenter_step(state, score, frame.index)
                    t1 = time.perf_counter()
                    st["motionseg"] += (t1 - t0) * 1e3
                    if was_recording:
                        pending.append(frame)
                    if ev is not None and ev.kind == "clip_start":
                        clips.append([ev.clip_id, ev.frame, None])
                        if cfg.output.write_clips:
                            writer = ClipWriter(clips_root, ev.clip_id)
                        pending.extend(f for f in ring if f.index >= ev.frame)
                    elif ev is not None:
                        close_clip(ev.frame)
                    if state.mode == "recording":
                        commit(frame.index - p.n_off)
                    if self.save_masks:
                        save_pgm(Frame((clean * 255).astype(np.uint8), frame.index),
                                 self.out / "masks" / f"mask_{frame.index:06d}.pgm")
                    det_rows.extend(dets)
                    t2 = time.perf_counter()
                    st["store"] += (t2 - t1) * 1e3

                    outs = tracker.step(dets, frame)
                    track_rows.extend(o.as_detection() for o in outs)
                    t3 = time.perf_counter()
                    st["track"] += (t3 - t2) * 1e3
                    retire(tracker.drain())

                    t4 = time.perf_counter()
                    live = [t for t in tracker.tracks if t.status == "confirmed"]
                    acts = monitor.update(live)
                    t5 = time.perf_counter()
                    st["activity"] += (t5 - t4) * 1e3
                    emit_acts(acts, {t.id: t.class_label for t in live})
                    st["store"] += (time.perf_counter() - t5) * 1e3
                    summary.frames += 1

        t0 = time.perf_counter()
        if summary.frames:
            last = prev.index
            ev = flush(state, last)
            if ev is not None:
                close_clip(ev.frame)
        tracker.close()
        retire(tracker.drain())
        index.close()
        write_exchange(self.out / "tracks.txt", track_rows)
        write_exchange(self.out / "detections.txt", det_rows)
        st["store"] += (time.perf_counter() - t0) * 1e3
        summary.total_ms = (time.perf_counter() - t_start) * 1e3
        return summary


def process(frames, width: int, height: int, out_dir, config: PipelineConfig | None = None,
            **kwargs) -> RunSummary:
    """Convenience wrapper: build a :class:`Pipeline` and run it."""
    pipe = Pipeline(config or PipelineConfig(), out_dir, width, height, **kwargs)
    return pipe.run(frames)
