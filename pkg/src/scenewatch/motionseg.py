"""Hybrid motion masks, blobs, activity score and clip segmentation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit
from scipy import ndimage

FUSION_MODES = ("union", "intersection", "bg_only")

_SQUARE = np.ones((3, 3), dtype=bool)


def fuse_masks(bg: np.ndarray, fl: np.ndarray, mode: str = "union") -> np.ndarray:
    if bg.shape != fl.shape:
        raise ValueError(f"mask size mismatch: {bg.shape} vs {fl.shape}")
    if mode == "union":
        return bg | fl
    if mode == "intersection":
        return bg & fl
    if mode == "bg_only":
        return bg.copy()
    raise ValueError(f"unknown fusion mode {mode!r}; expected one of {FUSION_MODES}")


@njit(nogil=True, cache=True)
def _morph3(src, out, tmp, grow):
    # separable 3x3 erosion (grow=False) or dilation (grow=True), zero outside
    h, w = src.shape
    for y in range(h):
        for x in range(w):
            left = src[y, x - 1] if x > 0 else False
            right = src[y, x + 1] if x < w - 1 else False
            if grow:
                tmp[y, x] = left or src[y, x] or right
            else:
                tmp[y, x] = left and src[y, x] and right
    for y in range(h):
        for x in range(w):
            up = tmp[y - 1, x] if y > 0 else False
            down = tmp[y + 1, x] if y < h - 1 else False
            if grow:
                out[y, x] = up or tmp[y, x] or down
            else:
                out[y, x] = up and tmp[y, x] and down


def morph_clean(mask: np.ndarray) -> np.ndarray:
    """3x3 opening followed by 3x3 closing; outside the image counts as background."""
    src = np.ascontiguousarray(mask, dtype=np.bool_)
    a, b, tmp = np.empty_like(src), np.empty_like(src), np.empty_like(src)
    _morph3(src, a, tmp, False)
    _morph3(a, b, tmp, True)
    _morph3(b, a, tmp, True)
    _morph3(a, b, tmp, False)
    return b


@dataclass(frozen=True)
class Blob:
    box: tuple[int, int, int, int]  # x, y, w, h
    area: int
    centroid: tuple[float, float]


def connected_components(mask: np.ndarray, min_area: int = 1) -> list[Blob]:
    """8-connected foreground components with at least ``min_area`` pixels,
    sorted by the (y, x) of their box origin."""
    labels, n = ndimage.label(mask, structure=_SQUARE)
    if n == 0:
        return []
    flat = labels.ravel()
    h, w = mask.shape
    areas = np.bincount(flat, minlength=n + 1)[1:]
    cy = np.bincount(flat, np.repeat(np.arange(h, dtype=np.float64), w), n + 1)[1:]
    cx = np.bincount(flat, np.tile(np.arange(w, dtype=np.float64), h), n + 1)[1:]
    blobs = []
    for k, sl in enumerate(ndimage.find_objects(labels)):
        area = int(areas[k])
        if area < min_area:
            continue
        y0, y1 = sl[0].start, sl[0].stop
        x0, x1 = sl[1].start, sl[1].stop
        blobs.append(Blob((x0, y0, x1 - x0, y1 - y0), area, (cx[k] / area, cy[k] / area)))
    blobs.sort(key=lambda b: (b.box[1], b.box[0]))
    return blobs


def activity_score(mask: np.ndarray) -> float:
    return float(np.count_nonzero(mask)) / mask.size


# ------------------------------------------------------------------ segmenter

@dataclass(frozen=True)
class SegmenterParams:
    t_on: float = 0.005
    t_off: float = 0.002
    n_on: int = 3
    n_off: int = 30
    pre_roll: int = 15
    post_roll: int = 15

    def __post_init__(self):
        if not 0 <= self.t_off < self.t_on:
            raise ValueError("need 0 <= t_off < t_on")
        if self.n_on < 1 or self.n_off < 1:
            raise ValueError("n_on and n_off must be >= 1")
        if self.pre_roll < 0 or self.post_roll < 0:
            raise ValueError("pre_roll and post_roll must be >= 0")
        if self.post_roll > self.n_off:
            raise ValueError("post_roll may not exceed n_off (clip end would lie in the future)")


@dataclass(frozen=True)
class ClipEvent:
    kind: str  # "clip_start" | "clip_end"
    frame: int
    clip_id: int


@dataclass(frozen=True)
class SegmenterState:
    params: SegmenterParams = field(default_factory=SegmenterParams)
    mode: str = "idle"
    consec_above: int = 0
    consec_below: int = 0
    current_clip_start: int | None = None
    last_frame: int = -1
    next_clip_id: int = 0
    last_clip_end: int = -1


def segmenter_step(state: SegmenterState, score: float, frame: int):
    """Advance the hysteresis state machine by one frame.

    Returns ``(new_state, event_or_None)``.  Start events point back to the
    first above-threshold frame minus ``pre_roll``; end events point to the
    last not-quiet frame plus ``post_roll``.
    """
    if frame <= state.last_frame:
        raise ValueError(f"frame {frame} presented after frame {state.last_frame}")
    p = state.params
    if state.mode == "idle":
        above = state.consec_above + 1 if score > p.t_on else 0
        if above == p.n_on:
            start = max(0, frame - p.n_on + 1 - p.pre_roll, state.last_clip_end + 1)
            event = ClipEvent("clip_start", start, state.next_clip_id)
            return replace(state, mode="recording", consec_above=0, consec_below=0,
                           current_clip_start=start, last_frame=frame), event
        return replace(state, consec_above=above, last_frame=frame), None

    below = state.consec_below + 1 if score < p.t_off else 0
    if below == p.n_off:
        end = frame - p.n_off + p.post_roll
        event = ClipEvent("clip_end", end, state.next_clip_id)
        return replace(state, mode="idle", consec_above=0, consec_below=0,
                       current_clip_start=None, last_frame=frame,
                       next_clip_id=state.next_clip_id + 1, last_clip_end=end), event
    return replace(state, consec_below=below, last_frame=frame), None


def flush(state: SegmenterState, last_frame: int) -> ClipEvent | None:
    if state.mode != "recording":
        return None
    return ClipEvent("clip_end", max(last_frame, state.current_clip_start), state.next_clip_id)


def segment_scores(scores, params: SegmenterParams | None = None) -> list[tuple[int, int]]:
    """Run the segmenter over a whole score sequence; returns clip intervals."""
    state = SegmenterState(params or SegmenterParams())
    clips, start = [], None
    for i, s in enumerate(scores):
        state, ev = segmenter_step(state, s, i)
        if ev is not None and ev.kind == "clip_start":
            start = ev.frame
        elif ev is not None:
            clips.append((start, ev.frame))
    ev = flush(state, len(scores) - 1)
    if ev is not None:
        clips.append((start, ev.frame))
    return clips
