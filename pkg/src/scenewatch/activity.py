"""Per-track activity labels from trajectory kinematics.

The classifier is a callable ``TrackWindow -> ActivityLabel``; anything
with that signature (a learned sequence model, say) can replace
:class:`RuleClassifier` in the pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

from .boxes import center

LABELS = ("stationary", "walking", "running", "loitering", "entering", "exiting")


@dataclass(frozen=True)
class ActivityParams:
    window: int = 30
    hop: int = 15
    loiter_lookback: int = 150
    walk_speed: float = 0.02
    run_speed: float = 0.15
    loiter_displacement: float = 1.0
    border_band: float = 8

    def __post_init__(self):
        if self.window < 2 or not 1 <= self.hop <= self.window:
            raise ValueError("need window >= 2 and 1 <= hop <= window")
        if not 0 < self.walk_speed < self.run_speed:
            raise ValueError("need 0 < walk_speed < run_speed")
        if self.loiter_lookback < self.window:
            raise ValueError("loiter_lookback must be >= window")


@dataclass(frozen=True)
class TrackWindow:
    track_id: int
    samples: tuple  # ((frame, box), ...) consecutive frames
    frame_dims: tuple[int, int]
    lookback: tuple = ()  # longer history ending at the same frame, for loitering

    def __post_init__(self):
        if not self.samples:
            raise ValueError("a window needs at least one sample")
        frames = [f for f, _ in self.samples]
        if any(b - a != 1 for a, b in zip(frames, frames[1:])):
            raise ValueError("window samples must be consecutive frames")

    @property
    def span(self) -> tuple[int, int]:
        return (self.samples[0][0], self.samples[-1][0])


@dataclass(frozen=True)
class ActivityLabel:
    label: str
    confidence: float
    window: tuple[int, int]


@dataclass(frozen=True)
class TrackFeatures:
    mean_speed: float  # box heights per frame
    net_displacement: float  # box heights
    heading: float  # radians, image coordinates
    border_start: bool
    border_end: bool
    inward: float  # change in centroid distance to the nearest edge, pixels

    @property
    def border_contact(self) -> bool:
        return self.border_start or self.border_end


class InsufficientDataError(ValueError):
    pass


class SequenceClassifier(Protocol):
    def __call__(self, window: TrackWindow) -> ActivityLabel: ...


def _touches_band(box, dims, band) -> bool:
    x, y, w, h = box
    W, H = dims
    return x < band or y < band or x + w > W - band or y + h > H - band


def _edge_distance(pt, dims) -> float:
    x, y = pt
    W, H = dims
    return min(x, y, W - x, H - y)


def track_features(samples, frame_dims, border_band: float = 8) -> TrackFeatures:
    if isinstance(samples, TrackWindow):
        samples = samples.samples
    if len(samples) < 2:
        raise InsufficientDataError("need at least 2 samples for kinematic features")
    cents = [center(b) for _, b in samples]
    mean_h = sum(b[3] for _, b in samples) / len(samples)
    steps = [math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(cents, cents[1:])]
    mean_step = sum(steps) / len(steps)
    dx = cents[-1][0] - cents[0][0]
    dy = cents[-1][1] - cents[0][1]
    return TrackFeatures(
        mean_speed=mean_step / mean_h,
        net_displacement=math.hypot(dx, dy) / mean_h,
        heading=math.atan2(dy, dx),
        border_start=_touches_band(samples[0][1], frame_dims, border_band),
        border_end=_touches_band(samples[-1][1], frame_dims, border_band),
        inward=_edge_distance(cents[-1], frame_dims) - _edge_distance(cents[0], frame_dims),
    )


def _confidence(margin: float, threshold: float) -> float:
    return min(1.0, 2.0 * abs(margin) / threshold)


def classify(features: TrackFeatures, window: TrackWindow, params: ActivityParams | None = None,
             lookback_features: TrackFeatures | None = None) -> ActivityLabel:
    """Rule table: entering > exiting > running > loitering > walking > stationary."""
    p = params or ActivityParams()
    f = features
    span = window.span
    if f.border_start and f.inward > 0:
        return ActivityLabel("entering", _confidence(f.inward, p.border_band), span)
    if f.border_end and f.inward < 0:
        return ActivityLabel("exiting", _confidence(f.inward, p.border_band), span)
    if f.mean_speed >= p.run_speed:
        return ActivityLabel("running", _confidence(f.mean_speed - p.run_speed, p.run_speed), span)
    lb = lookback_features
    if (lb is not None and lb.mean_speed >= p.walk_speed
            and lb.net_displacement < p.loiter_displacement):
        return ActivityLabel("loitering", _confidence(p.loiter_displacement - lb.net_displacement,
                                                      p.loiter_displacement), span)
    if f.mean_speed >= p.walk_speed:
        margin = min(f.mean_speed - p.walk_speed, p.run_speed - f.mean_speed)
        thr = p.walk_speed if margin == f.mean_speed - p.walk_speed else p.run_speed
        return ActivityLabel("walking", _confidence(margin, thr), span)
    return ActivityLabel("stationary", _confidence(p.walk_speed - f.mean_speed, p.walk_speed), span)


class RuleClassifier:
    """Deterministic kinematic rules behind the sequence-classifier interface."""

    def __init__(self, params: ActivityParams | None = None):
        self.params = params or ActivityParams()

    def __call__(self, window: TrackWindow) -> ActivityLabel:
        p = self.params
        feats = track_features(window.samples, window.frame_dims, p.border_band)
        lb = None
        if len(window.lookback) >= p.loiter_lookback:
            lb = track_features(window.lookback[-p.loiter_lookback:], window.frame_dims, p.border_band)
        return classify(feats, window, p, lb)


class ActivityMonitor:
    """Slides windows over growing track histories and merges runs of equal
    labels into intervals.

    ``update`` is called once per frame with the tracker's live tracks; a
    window is classified every ``hop`` new samples.  Finished intervals are
    returned as ``(track_id, label, start, end, first_box, last_box)``.
    """

    def __init__(self, frame_dims, params: ActivityParams | None = None,
                 classifier: SequenceClassifier | None = None):
        self.dims = frame_dims
        self.params = params or ActivityParams()
        self.classifier = classifier or RuleClassifier(self.params)
        self._since: dict[int, int] = {}
        self._open: dict[int, list] = {}

    def _classify(self, track_id, history):
        p = self.params
        samples = tuple((f, b) for f, b, _ in history[-p.window:])
        if len(samples) < 2:
            return []
        lookback = tuple((f, b) for f, b, _ in history[-p.loiter_lookback:])
        label = self.classifier(TrackWindow(track_id, samples, self.dims, lookback))
        return self._extend(track_id, label, samples)

    def _extend(self, track_id, label, samples):
        done = []
        cur = self._open.get(track_id)
        start, end = samples[0][0], samples[-1][0]
        if cur is not None and cur[0] == label.label:
            cur[2] = end
            cur[4] = samples[-1][1]
            return done
        if cur is not None:
            done.append((track_id, cur[0], cur[1], cur[2], cur[3], cur[4]))
            # overlapping hop: the new label owns frames after the old interval
            idx = next((i for i, (f, _) in enumerate(samples) if f > cur[2]), len(samples) - 1)
            start = samples[idx][0]
            first_box = samples[idx][1]
        else:
            first_box = samples[0][1]
        self._open[track_id] = [label.label, start, end, first_box, samples[-1][1]]
        return done

    def update(self, tracks) -> list[tuple]:
        done = []
        for t in tracks:
            n = self._since.get(t.id, 0) + 1
            if n >= self.params.hop and len(t.history) >= self.params.window:
                done += self._classify(t.id, t.history)
                n = 0
            self._since[t.id] = n
        return done

    def finish(self, track) -> list[tuple]:
        """Close a retired track, classifying its unlabelled tail.

        Trailing coasted samples after the last matched frame are ignored.
        """
        hist = [h for h in track.history if h[0] <= track.last_matched]
        cur = self._open.get(track.id)
        done = []
        if len(hist) >= 2 and hist[-1][0] > (cur[2] if cur else -1):
            done += self._classify(track.id, hist)
        cur = self._open.pop(track.id, None)
        self._since.pop(track.id, None)
        if cur is not None:
            done.append((track.id, cur[0], cur[1], cur[2], cur[3], cur[4]))
        return done
