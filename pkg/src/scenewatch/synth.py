"""Deterministic synthetic scenes with exact ground truth.

Objects are opaque axis-aligned rectangles moving along piecewise-linear
paths; static occluders are painted over them; a global gain schedule
models illumination; noise comes from a counter-based generator keyed by
``(seed, frame)`` so frames can be rendered in any order.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .activity import ActivityParams, RuleClassifier, TrackWindow
from .boxes import clip_box
from .frame_io import DEFAULT_FRAME_RATE, Frame, save_pgm, timestamp_ms

PRESETS = ("quiet", "single_walker", "three_objects", "occlusion_crossing", "illumination_ramp")


@dataclass(frozen=True)
class ObjectSpec:
    class_label: str
    intensity: int
    size: tuple[int, int]  # w, h
    trajectory: tuple  # ((frame, cx, cy), ...)
    visible_range: tuple[int, int]

    def __post_init__(self):
        frames = [t[0] for t in self.trajectory]
        if not frames or any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError("trajectory waypoints need strictly increasing frames")
        if self.size[0] < 2 or self.size[1] < 2:
            raise ValueError("objects must be at least 2x2")
        if not 0 <= self.intensity <= 255:
            raise ValueError("intensity must be 8-bit")

    def center(self, t: int) -> tuple[float, float]:
        fr = [p[0] for p in self.trajectory]
        return (float(np.interp(t, fr, [p[1] for p in self.trajectory])),
                float(np.interp(t, fr, [p[2] for p in self.trajectory])))

    def box(self, t: int) -> tuple[int, int, int, int]:
        cx, cy = self.center(t)
        w, h = self.size
        return (math.floor(cx - w / 2 + 0.5), math.floor(cy - h / 2 + 0.5), w, h)


@dataclass(frozen=True)
class Occluder:
    box: tuple[int, int, int, int]
    intensity: int
    frames: tuple[int, int] = (0, 1 << 30)

    def active(self, t: int) -> bool:
        return self.frames[0] <= t <= self.frames[1]


@dataclass(frozen=True)
class SceneSpec:
    width: int = 320
    height: int = 240
    n_frames: int = 300
    background_level: int = 60
    noise_sigma: float = 2.0
    illumination: tuple = ()  # ((frame, gain), ...), piecewise linear
    objects: tuple = ()
    occluders: tuple = ()
    seed: int = 0
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self):
        if any(g <= 0 for _, g in self.illumination):
            raise ValueError("illumination gains must be positive")
        if self.width < 1 or self.height < 1 or self.n_frames < 0:
            raise ValueError("bad scene dimensions")

    def gain(self, t: int) -> float:
        if not self.illumination:
            return 1.0
        return float(np.interp(t, [p[0] for p in self.illumination], [p[1] for p in self.illumination]))

    def without_occluders(self) -> "SceneSpec":
        return replace(self, occluders=())


@dataclass(frozen=True)
class GtObject:
    object_id: int
    class_label: str
    box: tuple[int, int, int, int]
    occluded_fraction: float


@dataclass
class GroundTruth:
    frames: list = field(default_factory=list)  # per frame: list[GtObject]
    activity_intervals: list = field(default_factory=list)  # [(start, end)]
    activity_labels: list = field(default_factory=list)  # [(object_id, start, end, label)]

    def rows(self):
        """``(frame, object_id, box, class_label)`` for every visible object."""
        for t, objs in enumerate(self.frames):
            for o in objs:
                yield t, o.object_id, o.box, o.class_label


# ------------------------------------------------------------------ rendering

def frame_noise(seed: int, t: int, n: int) -> np.ndarray:
    """Standard normal samples for frame ``t``: Box-Muller on a Philox stream."""
    gen = np.random.Generator(np.random.Philox(key=[seed & (2**64 - 1), 0], counter=[0, 0, 0, t]))
    u = gen.random(2 * n)
    u1 = 1.0 - u[0::2]
    u2 = u[1::2]
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def _occluded_fraction(box, occluders, t, width, height) -> float:
    x, y, w, h = box
    cover = np.zeros((h, w), dtype=bool)
    for oc in occluders:
        if not oc.active(t):
            continue
        ox, oy, ow, oh = oc.box
        x0, y0 = max(ox, x), max(oy, y)
        x1, y1 = min(ox + ow, x + w), min(oy + oh, y + h)
        if x1 > x0 and y1 > y0:
            cover[y0 - y:y1 - y, x0 - x:x1 - x] = True
    return float(cover.sum()) / (w * h)


def render_frame(spec: SceneSpec, t: int) -> tuple[Frame, list[GtObject]]:
    W, H = spec.width, spec.height
    base = np.full((H, W), float(spec.background_level))
    gt = []
    for oid, obj in enumerate(spec.objects):
        if not obj.visible_range[0] <= t <= obj.visible_range[1]:
            continue
        box = clip_box(obj.box(t), W, H)
        if box is None:
            continue
        x, y, w, h = box
        base[y:y + h, x:x + w] = obj.intensity
        gt.append(GtObject(oid, obj.class_label, box, 0.0))
    for oc in spec.occluders:
        if oc.active(t):
            box = clip_box(oc.box, W, H)
            if box is not None:
                x, y, w, h = box
                base[y:y + h, x:x + w] = oc.intensity
    if spec.occluders:
        gt = [GtObject(g.object_id, g.class_label, g.box,
                       _occluded_fraction(g.box, spec.occluders, t, W, H)) for g in gt]
    v = spec.gain(t) * base
    if spec.noise_sigma > 0:
        v = v + spec.noise_sigma * frame_noise(spec.seed, t, W * H).reshape(H, W)
    px = np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8)
    return Frame(px, index=t, timestamp_ms=timestamp_ms(t, spec.frame_rate)), gt


def _intervals(flags) -> list[tuple[int, int]]:
    out, start = [], None
    for t, on in enumerate(flags):
        if on and start is None:
            start = t
        elif not on and start is not None:
            out.append((start, t - 1))
            start = None
    if start is not None:
        out.append((start, len(flags) - 1))
    return out


def _label_objects(gt_frames, dims, params: ActivityParams) -> list:
    tracks: dict[int, list] = {}
    for t, objs in enumerate(gt_frames):
        for o in objs:
            tracks.setdefault(o.object_id, []).append((t, o.box))
    clf = RuleClassifier(params)
    out = []
    for oid, hist in sorted(tracks.items()):
        runs, cur = [], [hist[0]]
        for s in hist[1:]:
            if s[0] == cur[-1][0] + 1:
                cur.append(s)
            else:
                runs.append(cur)
                cur = [s]
        runs.append(cur)
        for run in runs:
            for end in range(min(params.window, len(run)) - 1, len(run), params.hop):
                window = tuple(run[max(0, end - params.window + 1):end + 1])
                if len(window) < 2:
                    continue
                lookback = tuple(run[max(0, end - params.loiter_lookback + 1):end + 1])
                lab = clf(TrackWindow(oid, window, dims, lookback))
                out.append((oid, window[0][0], window[-1][0], lab.label))
    return out


def render_scene(spec: SceneSpec, label_params: ActivityParams | None = None):
    frames, gt = [], GroundTruth()
    for t in range(spec.n_frames):
        f, objs = render_frame(spec, t)
        frames.append(f)
        gt.frames.append(objs)
    gt.activity_intervals = _intervals([bool(objs) for objs in gt.frames])
    gt.activity_labels = _label_objects(gt.frames, (spec.width, spec.height),
                                        label_params or ActivityParams())
    return frames, gt


# ------------------------------------------------------------------ presets

def _walker(label, intensity, size, y, x_from, x_to, f0, speed):
    f1 = f0 + int(math.ceil(abs(x_to - x_from) / speed))
    return ObjectSpec(label, intensity, size, ((f0, x_from, y), (f1, x_to, y)), (f0, f1))


def preset(name: str) -> SceneSpec:
    """Canonical scenes used by the tests and demos (320x240, 30 fps)."""
    if name == "quiet":
        return SceneSpec(n_frames=300, background_level=60, noise_sigma=2.0, seed=11)
    if name == "single_walker":
        return SceneSpec(n_frames=300, seed=12, objects=(
            _walker("person", 170, (16, 40), 130, -8, 328, 30, 1.5),))
    if name == "three_objects":
        return SceneSpec(n_frames=600, seed=13, objects=(
            _walker("person", 180, (16, 40), 60, -8, 328, 20, 1.5),
            _walker("car", 200, (48, 24), 150, 344, -24, 100, 3.0),
            _walker("dog", 20, (20, 14), 210, -10, 330, 250, 2.5),
            _walker("person", 140, (14, 36), 105, 327, -7, 380, 2.0),
        ))
    if name == "occlusion_crossing":
        return SceneSpec(n_frames=240, seed=14, objects=(
            _walker("person", 180, (16, 40), 125, -8, 328, 20, 2.0),
            _walker("person", 150, (16, 40), 45, 328, -8, 40, 1.5),
        ), occluders=(Occluder((150, 80, 30, 90), 110),))
    if name == "illumination_ramp":
        return SceneSpec(n_frames=300, background_level=100, noise_sigma=2.0, seed=15,
                         illumination=((0, 1.0), (150, 1.3), (299, 1.0)))
    raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


# ------------------------------------------------------------- serialization

def _fmt(v) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def spec_to_ini(spec: SceneSpec) -> str:
    lines = ["[scene]",
             f"width = {spec.width}", f"height = {spec.height}", f"n_frames = {spec.n_frames}",
             f"background_level = {spec.background_level}", f"noise_sigma = {_fmt(spec.noise_sigma)}",
             f"seed = {spec.seed}", f"frame_rate = {_fmt(spec.frame_rate)}",
             "illumination = " + " ".join(f"{f}:{_fmt(g)}" for f, g in spec.illumination), ""]
    for i, o in enumerate(spec.objects):
        lines += [f"[object.{i}]", f"class = {o.class_label}", f"intensity = {o.intensity}",
                  f"size = {o.size[0]}x{o.size[1]}",
                  "trajectory = " + " ".join(f"{f}:{_fmt(x)},{_fmt(y)}" for f, x, y in o.trajectory),
                  f"visible = {o.visible_range[0]}-{o.visible_range[1]}", ""]
    for i, oc in enumerate(spec.occluders):
        lines += [f"[occluder.{i}]", "box = " + ",".join(str(v) for v in oc.box),
                  f"intensity = {oc.intensity}", f"frames = {oc.frames[0]}-{oc.frames[1]}", ""]
    return "\n".join(lines)


def _num(s: str):
    v = float(s)
    return int(v) if v.is_integer() and "." not in s else v


def spec_from_ini(text: str) -> SceneSpec:
    cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",))
    cp.read_string(text)
    sc = cp["scene"]
    known = {"width", "height", "n_frames", "background_level", "noise_sigma", "seed",
             "frame_rate", "illumination"}
    if set(sc) - known:
        raise ValueError(f"unknown [scene] keys: {sorted(set(sc) - known)}")
    illum = tuple((int(f), float(g)) for f, g in
                  (tok.split(":") for tok in sc.get("illumination", "").split()))
    objects, occluders = [], []
    for name in cp.sections():
        sec = cp[name]
        if name.startswith("object."):
            w, h = (int(v) for v in sec["size"].lower().split("x"))
            traj = []
            for tok in sec["trajectory"].split():
                f, xy = tok.split(":")
                x, y = xy.split(",")
                traj.append((int(f), _num(x), _num(y)))
            a, b = (int(v) for v in sec["visible"].split("-"))
            objects.append(ObjectSpec(sec["class"], int(sec["intensity"]), (w, h), tuple(traj), (a, b)))
        elif name.startswith("occluder."):
            box = tuple(int(v) for v in sec["box"].split(","))
            a, b = (int(v) for v in sec.get("frames", f"0-{1 << 30}").split("-"))
            occluders.append(Occluder(box, int(sec["intensity"]), (a, b)))
        elif name != "scene":
            raise ValueError(f"unknown section [{name}]")
    return SceneSpec(int(sc["width"]), int(sc["height"]), int(sc["n_frames"]),
                     int(sc["background_level"]), float(sc["noise_sigma"]), illum,
                     tuple(objects), tuple(occluders), int(sc["seed"]),
                     float(sc.get("frame_rate", DEFAULT_FRAME_RATE)))


def write_scene(spec: SceneSpec, out_dir) -> GroundTruth:
    """Render to ``out_dir``: frames/, gt.txt, activity.txt, scene.cfg."""
    from .detect import Detection, write_exchange

    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    frames, gt = render_scene(spec)
    for f in frames:
        save_pgm(f, out / "frames" / f"frame_{f.index:06d}.pgm")
    rows = [Detection(t, box, 1.0, label, "external", track_id=oid) for t, oid, box, label in gt.rows()]
    write_exchange(out / "gt.txt", rows)
    (out / "activity.txt").write_text("".join(f"{a},{b}\n" for a, b in gt.activity_intervals))
    (out / "scene.cfg").write_text(spec_to_ini(spec))
    return gt
