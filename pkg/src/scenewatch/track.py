"""Multi-object tracking: constant-velocity Kalman filter per track,
Hungarian association on an IoU + appearance cost, coasting through
missed detections, and a tentative/confirmed/lost lifecycle."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .boxes import center, clip_box, iou, near_border
from .detect import Detection
from .frame_io import Frame

__all__ = [
    "TrackerParams", "KalmanState", "Track", "Tracker", "TrackOutput",
    "kf_init", "kf_predict", "kf_update", "iou", "appearance", "distance",
    "hungarian", "tracker_step",
]

HIST_BINS = 32
APPEARANCE_EMA = 0.1


@dataclass(frozen=True)
class TrackerParams:
    min_hits: int = 3
    max_age: int = 30
    lambda_iou: float = 0.7
    gate_iou: float = 0.05
    process_noise: float = 1.0
    measurement_noise: float = 2.0
    # chi-square gate on the Kalman innovation (4 dof, 99%); 0 disables it
    gate_mahalanobis: float = 13.28
    # second pass for coasting tracks: centre within this many box sizes
    # and appearance distance at most recover_appearance
    recover_radius: float = 1.0
    recover_appearance: float = 0.5
    # a track missed while its box is within this many pixels of the frame
    # edge is taken to have left the scene
    exit_band: float = 8.0

    def __post_init__(self):
        if not 0.0 <= self.lambda_iou <= 1.0:
            raise ValueError("lambda_iou must be in [0, 1]")
        if self.min_hits < 1 or self.max_age < 0:
            raise ValueError("min_hits >= 1 and max_age >= 0 required")
        if not 0.0 <= self.gate_iou <= 1.0:
            raise ValueError("gate_iou must be in [0, 1]")
        if self.process_noise <= 0 or self.measurement_noise <= 0:
            raise ValueError("noise std-devs must be positive")
        if self.exit_band < 0:
            raise ValueError("exit_band must be >= 0")
        if self.recover_radius < 0 or not 0 <= self.recover_appearance <= 1:
            raise ValueError("need recover_radius >= 0 and recover_appearance in [0, 1]")


# ------------------------------------------------------------------ Kalman

@dataclass
class KalmanState:
    x: np.ndarray  # cx, cy, w, h, vcx, vcy, vw, vh
    P: np.ndarray

    def box(self) -> tuple[float, float, float, float]:
        cx, cy, w, h = self.x[:4]
        return (float(cx - w / 2.0), float(cy - h / 2.0), float(w), float(h))


_F = np.eye(8)
_F[:4, 4:] = np.eye(4)
_H = np.eye(4, 8)


def _measure(box) -> np.ndarray:
    x, y, w, h = box
    return np.array([x + w / 2.0, y + h / 2.0, w, h], dtype=np.float64)


def _clamp_size(x: np.ndarray) -> None:
    x[2] = max(x[2], 1.0)
    x[3] = max(x[3], 1.0)


def kf_init(det, params: TrackerParams | None = None) -> KalmanState:
    p = params or TrackerParams()
    box = det.box if isinstance(det, Detection) else det
    x = np.zeros(8)
    x[:4] = _measure(box)
    r2 = p.measurement_noise ** 2
    return KalmanState(x, np.diag([r2] * 4 + [10.0 * r2] * 4))


def kf_predict(s: KalmanState, params: TrackerParams | None = None) -> KalmanState:
    p = params or TrackerParams()
    q = np.diag([p.process_noise ** 2] * 4 + [(p.process_noise / 2.0) ** 2] * 4)
    x = _F @ s.x
    _clamp_size(x)
    return KalmanState(x, _F @ s.P @ _F.T + q)


def innovation_distance(s: KalmanState, z, params: TrackerParams | None = None) -> float:
    """Squared Mahalanobis distance of a measured box from the prediction."""
    p = params or TrackerParams()
    S = _H @ s.P @ _H.T + np.eye(4) * p.measurement_noise ** 2
    y = _measure(z) - _H @ s.x
    return float(y @ np.linalg.solve(S, y))


def kf_update(s: KalmanState, z, params: TrackerParams | None = None) -> KalmanState:
    """Standard linear update with a measured box ``(x, y, w, h)``."""
    p = params or TrackerParams()
    zv = _measure(z)
    if not np.all(np.isfinite(zv)):
        raise ValueError(f"non-finite measurement {z}")
    R = np.eye(4) * p.measurement_noise ** 2
    S = _H @ s.P @ _H.T + R
    K = np.linalg.solve(S, _H @ s.P).T  # P H^T S^-1, S symmetric
    x = s.x + K @ (zv - _H @ s.x)
    P = (np.eye(8) - K @ _H) @ s.P
    P = 0.5 * (P + P.T)
    _clamp_size(x)
    return KalmanState(x, P)


# -------------------------------------------------------------- appearance

def appearance(frame, box) -> np.ndarray:
    """L1-normalised 32-bin intensity histogram of the box interior."""
    px = frame.pixels if isinstance(frame, Frame) else np.asarray(frame)
    h, w = px.shape
    x, y, bw, bh = box
    x0, y0 = max(int(math.floor(x)), 0), max(int(math.floor(y)), 0)
    x1, y1 = min(int(math.ceil(x + bw)), w), min(int(math.ceil(y + bh)), h)
    if x1 <= x0 or y1 <= y0:
        return np.full(HIST_BINS, 1.0 / HIST_BINS)
    patch = px[y0:y1, x0:x1]
    hist = np.bincount((patch >> 3).ravel(), minlength=HIST_BINS).astype(np.float64)
    return hist / hist.sum()


def distance(h1: np.ndarray, h2: np.ndarray) -> float:
    """Bhattacharyya distance, in [0, 1]."""
    bc = float(np.sum(np.sqrt(h1 * h2)))
    return math.sqrt(max(0.0, 1.0 - bc))


# --------------------------------------------------------------- assignment

def _lap_rows_le_cols(a: list[list[float]]):
    # shortest augmenting path with potentials; returns (column per row, u, v)
    n, m = len(a), len(a[0])
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            row = a[i0 - 1]
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    col_of = [-1] * n
    for j in range(1, m + 1):
        if p[j]:
            col_of[p[j] - 1] = j - 1
    return col_of, u[1:], v[1:]


def _solve(c: np.ndarray):
    # optimal pairs of a finite matrix plus a flag telling whether the
    # optimum might not be unique (some non-assigned edge is tight)
    if c.size == 0:
        return [], False
    transpose = c.shape[0] > c.shape[1]
    work = c.T if transpose else c
    cols, u, v = _lap_rows_le_cols(work.tolist())
    tol = 1e-9 * max(1.0, float(np.abs(work).max()))
    reduced = work - np.asarray(u)[:, None] - np.asarray(v)[None, :]
    tied = int(np.count_nonzero(np.abs(reduced) <= tol)) > len(cols)
    pairs = [(k, r) if transpose else (r, k) for r, k in enumerate(cols)]
    return sorted(pairs), tied


def _total(c: np.ndarray, pairs) -> float:
    return float(sum(c[r, k] for r, k in pairs))


def _lex_min(c: np.ndarray, best: float):
    # among assignments of cost ``best``, the lexicographically smallest
    n, m = c.shape
    need = min(n, m)
    tol = 1e-9 * max(1.0, abs(best))
    fixed, cost_so_far, free = [], 0.0, list(range(m))
    for r in range(n):
        rest_rows = n - r - 1
        chosen = None
        for k in free:
            still = need - len(fixed) - 1
            cols = [j for j in free if j != k]
            if min(rest_rows, len(cols)) < still:
                continue
            sub = c[r + 1:][:, cols]
            sub_pairs = _solve(sub)[0] if still else []
            if abs(cost_so_far + c[r, k] + _total(sub, sub_pairs) - best) <= tol:
                chosen = k
                break
        if chosen is not None:
            fixed.append((r, chosen))
            cost_so_far += c[r, chosen]
            free.remove(chosen)
        if len(fixed) == need:
            break
    return fixed


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost assignment of ``min(n, m)`` pairs, sorted by row.

    ``inf`` entries are forbidden: they are solved as a dominating penalty
    and any pair that still lands on one is dropped.  Among equal-cost
    optima the lexicographically smallest pair list is returned.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.size == 0:
        return []
    forbidden = ~np.isfinite(c)
    finite = c[~forbidden]
    if forbidden.any():
        span = float(np.abs(finite).max()) if finite.size else 1.0
        big = (span + 1.0) * 2.0 * (min(c.shape) + 1)
        c = np.where(forbidden, big, c)
    pairs, tied = _solve(c)
    if tied:
        pairs = _lex_min(c, _total(c, pairs))
    return [(r, k) for r, k in pairs if not forbidden[r, k]]


# ------------------------------------------------------------------- tracks

@dataclass
class Track:
    id: int
    state: KalmanState
    appearance: np.ndarray
    status: str = "tentative"  # tentative | confirmed | lost
    hits: int = 1
    misses: int = 0
    class_votes: Counter = field(default_factory=Counter)
    history: list = field(default_factory=list)  # (frame, box, coasted)
    first_frame: int = 0
    last_matched: int = 0
    confirmed_frame: int = -1  # frame of confirmation, -1 if never confirmed

    @property
    def class_label(self) -> str:
        if not self.class_votes:
            return "object"
        return self.class_votes.most_common(1)[0][0]

    def box(self):
        return self.state.box()


@dataclass(frozen=True)
class TrackOutput:
    track_id: int
    frame: int
    box: tuple
    coasted: bool
    class_label: str

    def as_detection(self) -> Detection:
        box = tuple(round(float(v), 2) for v in self.box)
        return Detection(self.frame, box, 0.0 if self.coasted else 1.0,
                         self.class_label, "blob", track_id=self.track_id)


class Tracker:
    """Stateful multi-object tracker; feed it one frame at a time."""

    def __init__(self, params: TrackerParams | None = None, first_id: int = 1):
        self.params = params or TrackerParams()
        self.tracks: list[Track] = []
        self.finished: list[Track] = []
        self.next_id = first_id
        self.last_frame = -1

    def step(self, detections, frame: Frame) -> list[TrackOutput]:
        p = self.params
        if frame.index <= self.last_frame:
            raise ValueError(f"frame {frame.index} presented after frame {self.last_frame}")
        self.last_frame = frame.index
        fw, fh = frame.width, frame.height

        for t in self.tracks:
            t.state = kf_predict(t.state, p)
        det_hist = [appearance(frame, d.box) for d in detections]

        pairs = []
        if self.tracks and detections:
            cost = np.full((len(self.tracks), len(detections)), np.inf)
            for i, t in enumerate(self.tracks):
                pbox = t.box()
                for j, d in enumerate(detections):
                    ov = iou(pbox, d.box)
                    if ov < p.gate_iou or ov <= 0.0:
                        continue
                    if p.gate_mahalanobis > 0 and \
                            innovation_distance(t.state, d.box, p) > p.gate_mahalanobis:
                        continue
                    cost[i, j] = p.lambda_iou * (1.0 - ov) \
                        + (1.0 - p.lambda_iou) * distance(t.appearance, det_hist[j])
            pairs = hungarian(cost)

        pairs += self._recover(pairs, detections, det_hist)
        matched_t = {i for i, _ in pairs}
        matched_d = {j for _, j in pairs}
        for i, j in pairs:
            t, d = self.tracks[i], detections[j]
            t.state = kf_update(t.state, d.box, p)
            t.hits += 1
            t.misses = 0
            mixed = (1.0 - APPEARANCE_EMA) * t.appearance + APPEARANCE_EMA * det_hist[j]
            t.appearance = mixed / mixed.sum()
            t.class_votes[d.class_label] += 1
            t.last_matched = frame.index
            t.history.append((frame.index, t.box(), False))
            if t.status == "tentative" and t.hits >= p.min_hits:
                t.status = "confirmed"
                t.confirmed_frame = frame.index

        for i, t in enumerate(self.tracks):
            if i in matched_t:
                continue
            t.misses += 1
            t.hits = 0
            # an unobserved object keeps its size
            t.state.x[6:8] = 0.0
            if (t.status == "tentative" or t.misses > p.max_age
                    or _visible(t.box(), fw, fh) is None
                    or near_border(t.box(), fw, fh, p.exit_band)):
                t.status = "lost"
            else:
                t.history.append((frame.index, t.box(), True))

        for j, d in enumerate(detections):
            if j in matched_d:
                continue
            t = Track(self.next_id, kf_init(d, p), det_hist[j], first_frame=frame.index,
                      last_matched=frame.index)
            t.class_votes[d.class_label] += 1
            t.history.append((frame.index, t.box(), False))
            if p.min_hits <= 1:
                t.status = "confirmed"
                t.confirmed_frame = frame.index
            self.next_id += 1
            self.tracks.append(t)

        alive = []
        for t in self.tracks:
            if t.status == "lost":
                self.finished.append(t)
            else:
                alive.append(t)
        self.tracks = alive

        out = []
        for t in self.tracks:
            if t.status != "confirmed":
                continue
            box = _visible(t.box(), fw, fh)
            if box is None:
                continue
            out.append(TrackOutput(t.id, frame.index, box, t.history[-1][2], t.class_label))
        return out

    def _recover(self, pairs, detections, det_hist):
        # re-acquire coasting confirmed tracks whose predicted box no longer
        # overlaps the reappearing object (typical after an occlusion)
        p = self.params
        used_t = {i for i, _ in pairs}
        used_d = {j for _, j in pairs}
        ti = [i for i, t in enumerate(self.tracks)
              if i not in used_t and t.status == "confirmed" and t.misses > 0]
        dj = [j for j in range(len(detections)) if j not in used_d]
        if not ti or not dj:
            return []
        cost = np.full((len(ti), len(dj)), np.inf)
        for a, i in enumerate(ti):
            t = self.tracks[i]
            cx, cy, w, h = t.state.x[:4]
            radius = p.recover_radius * max(w, h)
            for b, j in enumerate(dj):
                dx, dy = center(detections[j].box)
                dist = distance(t.appearance, det_hist[j])
                if math.hypot(dx - cx, dy - cy) <= radius and dist <= p.recover_appearance:
                    cost[a, b] = dist
        return [(ti[a], dj[b]) for a, b in hungarian(cost)]

    def close(self) -> list[Track]:
        """End of stream: retire every live track."""
        for t in self.tracks:
            self.finished.append(t)
        self.tracks = []
        return self.finished

    def drain(self) -> list[Track]:
        """Tracks retired since the last call, in retirement order."""
        out, self.finished = self.finished, []
        return out


def _visible(box, width, height):
    # the part of ``box`` inside the frame, or None when under one pixel
    c = clip_box(box, width, height)
    return c if c is not None and c[2] >= 1 and c[3] >= 1 else None


def tracker_step(tracker: Tracker, detections, frame: Frame) -> list[TrackOutput]:
    return tracker.step(detections, frame)
