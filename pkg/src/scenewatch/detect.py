"""Blob detection with multi-scale pooling, NMS, contextual priors and an
adapter for detections produced elsewhere (any CNN detector's export)."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .boxes import area, clip_box, iou, near_border
from .motionseg import connected_components


@dataclass(frozen=True)
class Detection:
    frame: int
    box: tuple
    score: float
    class_label: str = "object"
    source: str = "blob"  # "blob" | "external"
    border: bool = False
    track_id: int = -1

    def __post_init__(self):
        if self.box[2] < 1 or self.box[3] < 1:
            raise ValueError(f"detection box must be at least 1x1, got {self.box}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"detection score {self.score} outside [0, 1]")


@dataclass(frozen=True)
class ContextPrior:
    min_area: float = 50
    max_area_fraction: float = 0.5
    aspect_range: tuple[float, float] = (0.2, 5.0)
    border_band: float = 8

    def __post_init__(self):
        if not 0 < self.max_area_fraction <= 1:
            raise ValueError("max_area_fraction must be in (0, 1]")
        if not self.aspect_range[0] < self.aspect_range[1]:
            raise ValueError("aspect_range must be (min, max) with min < max")


class DetectionFormatError(ValueError):
    pass


def _downsample_mask(mask: np.ndarray) -> np.ndarray:
    # a coarse pixel is set when at least half of its 2x2 block is set
    h, w = mask.shape[0] // 2, mask.shape[1] // 2
    m = mask[: 2 * h, : 2 * w].astype(np.uint8)
    count = m[0::2, 0::2] + m[1::2, 0::2] + m[0::2, 1::2] + m[1::2, 1::2]
    return count >= 2


def _tighten(mask: np.ndarray, box):
    x, y, w, h = box
    sub = mask[y:y + h, x:x + w]
    rows = np.flatnonzero(sub.any(axis=1))
    cols = np.flatnonzero(sub.any(axis=0))
    if rows.size == 0:
        return box
    return (x + int(cols[0]), y + int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def multiscale_candidates(mask: np.ndarray, levels: int, min_area: float, frame: int = 0):
    """Blob detections pooled over a mask pyramid, before NMS."""
    if levels < 1:
        raise ValueError("levels must be >= 1")
    height, width = mask.shape
    dets = []
    m = mask
    for level in range(levels):
        f = 2 ** level
        if level:
            m = _downsample_mask(m)
            if min(m.shape) == 0:
                break
        for blob in connected_components(m, max(1, int(np.ceil(min_area / (f * f))))):
            x, y, w, h = blob.box
            box = clip_box((x * f, y * f, w * f, h * f), width, height)
            if box is None:
                continue
            if level:
                # coarse boxes are snapped back onto the full-resolution pixels
                box = _tighten(mask, box)
            score = min(1.0, blob.area * f * f / (4.0 * min_area))
            dets.append(Detection(frame, box, score))
    return dets


def nms(dets, iou_threshold: float = 0.5):
    order = sorted(dets, key=lambda d: (-d.score, -area(d.box), d.box[1], d.box[0]))
    kept = []
    for d in order:
        if all(iou(d.box, k.box) <= iou_threshold for k in kept):
            kept.append(d)
    return kept


def detect_multiscale(mask: np.ndarray, levels: int = 3, min_area: float = 50,
                      iou_threshold: float = 0.5, frame: int = 0):
    return nms(multiscale_candidates(mask, levels, min_area, frame), iou_threshold)


def contextual_filter(dets, prior: ContextPrior, frame_dims):
    """Drop implausible sizes/shapes; flag detections inside the border band."""
    width, height = frame_dims
    limit = prior.max_area_fraction * width * height
    lo, hi = prior.aspect_range
    out = []
    for d in dets:
        a = area(d.box)
        aspect = d.box[2] / d.box[3]
        if a < prior.min_area or a > limit or not lo <= aspect <= hi:
            continue
        flag = near_border(d.box, width, height, prior.border_band)
        out.append(d if d.border == flag else replace(d, border=flag))
    return out


def merge_detections(blob, external, prior: ContextPrior | None = None, frame_dims=None):
    """External detections win: blobs overlapping one with IoU > 0.5 are dropped."""
    kept = [b for b in blob if all(iou(b.box, e.box) <= 0.5 for e in external)]
    merged = list(external) + kept
    if prior is None or frame_dims is None:
        return merged
    return contextual_filter(merged, prior, frame_dims)


# -------------------------------------------------------- exchange format

def _num(tok: str) -> float:
    v = float(tok)
    if not np.isfinite(v):
        raise ValueError(tok)
    return int(v) if v.is_integer() else v


def parse_exchange_line(line: str, lineno: int = 0) -> Detection:
    parts = line.strip().split(",")
    if len(parts) != 8:
        raise DetectionFormatError(f"line {lineno}: expected 8 comma-separated fields, got {len(parts)}")
    try:
        frame = int(parts[0])
        track_id = int(parts[1])
        x, y, w, h = (_num(p) for p in parts[2:6])
        score = float(parts[6])
    except ValueError:
        raise DetectionFormatError(f"line {lineno}: non-numeric field in {line.strip()!r}") from None
    cls = parts[7].strip()
    if frame < 0:
        raise DetectionFormatError(f"line {lineno}: negative frame index")
    if w < 0 or h < 0:
        raise DetectionFormatError(f"line {lineno}: negative box dimensions")
    if not cls or any(c.isspace() or c in ",\"" for c in cls):
        raise DetectionFormatError(f"line {lineno}: class must be a single unquoted token")
    try:
        return Detection(frame, (x, y, w, h), score, cls, "external", track_id=track_id)
    except ValueError as exc:
        raise DetectionFormatError(f"line {lineno}: {exc}") from None


def read_exchange(path) -> list[Detection]:
    """All rows of an exchange file, in file order."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            rows.append(parse_exchange_line(line, lineno))
    return rows


def load_external_detections(path) -> dict[int, list[Detection]]:
    by_frame: dict[int, list[Detection]] = {}
    for d in read_exchange(path):
        by_frame.setdefault(d.frame, []).append(d)
    return by_frame


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) or float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def format_exchange_line(d: Detection) -> str:
    x, y, w, h = d.box
    return ",".join([str(d.frame), str(d.track_id), _fmt(x), _fmt(y), _fmt(w), _fmt(h),
                     _fmt(d.score), d.class_label])


def write_exchange(path, dets) -> None:
    """Write detections sorted by frame (stable within a frame)."""
    rows = sorted(dets, key=lambda d: d.frame)
    Path(path).write_text("".join(format_exchange_line(d) + "\n" for d in rows), encoding="utf-8")
