"""Axis-aligned boxes as ``(x, y, w, h)`` tuples, top-left origin."""

from __future__ import annotations


def iou(a, b) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    inter = iw * ih if iw > 0 and ih > 0 else 0.0
    union = aw * ah + bw * bh - inter
    if union <= 0:
        return 0.0
    return inter / union


def area(box) -> float:
    return box[2] * box[3]


def clip_box(box, width: int, height: int):
    """Intersect with the frame; ``None`` when nothing is left."""
    x, y, w, h = box
    x0, y0 = max(x, 0), max(y, 0)
    x1, y1 = min(x + w, width), min(y + h, height)
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1 - x0, y1 - y0)


def center(box) -> tuple[float, float]:
    x, y, w, h = box
    return (x + w / 2.0, y + h / 2.0)


def near_border(box, width: int, height: int, band: float) -> bool:
    x, y, w, h = box
    return x < band or y < band or x + w > width - band or y + h > height - band
