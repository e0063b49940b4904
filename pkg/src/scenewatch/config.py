"""INI-style pipeline configuration.

Every section maps onto one parameter dataclass; unknown sections or keys
are rejected so typos fail loudly instead of silently using defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field, fields

from .activity import ActivityParams
from .background import GmmParams
from .flow import LkParams
from .motionseg import FUSION_MODES, SegmenterParams
from .track import TrackerParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class InputParams:
    frame_rate: float = 30.0
    source: str = ""

    def __post_init__(self):
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")


@dataclass(frozen=True)
class SegmentParams:
    """Mask fusion, blob extraction and clip hysteresis settings."""
    fusion: str = "union"
    min_area: int = 50  # at 320x240; scaled with frame area
    t_on: float = 0.005
    t_off: float = 0.002
    n_on: int = 3
    n_off: int = 30
    pre_roll: int = 15
    post_roll: int = 15

    def __post_init__(self):
        if self.fusion not in FUSION_MODES:
            raise ValueError(f"fusion must be one of {FUSION_MODES}")
        if self.min_area < 1:
            raise ValueError("min_area must be >= 1")
        self.segmenter()  # validates the hysteresis values

    def segmenter(self) -> SegmenterParams:
        return SegmenterParams(self.t_on, self.t_off, self.n_on, self.n_off,
                               self.pre_roll, self.post_roll)

    def scaled_min_area(self, width: int, height: int) -> int:
        return max(1, int(round(self.min_area * (width * height) / (320 * 240))))


@dataclass(frozen=True)
class DetectParams:
    levels: int = 3
    iou_threshold: float = 0.5
    max_area_fraction: float = 0.5
    aspect_min: float = 0.2
    aspect_max: float = 5.0
    border_band: int = 8

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if not 0 <= self.iou_threshold <= 1:
            raise ValueError("iou_threshold must be in [0, 1]")
        if not 0 < self.aspect_min < self.aspect_max:
            raise ValueError("need 0 < aspect_min < aspect_max")


@dataclass(frozen=True)
class OutputParams:
    save_masks: bool = False
    write_clips: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    input: InputParams = field(default_factory=InputParams)
    background: GmmParams = field(default_factory=GmmParams)
    flow: LkParams = field(default_factory=LkParams)
    segmenter: SegmentParams = field(default_factory=SegmentParams)
    detect: DetectParams = field(default_factory=DetectParams)
    track: TrackerParams = field(default_factory=TrackerParams)
    activity: ActivityParams = field(default_factory=ActivityParams)
    output: OutputParams = field(default_factory=OutputParams)

    @classmethod
    def from_ini(cls, text: str) -> "PipelineConfig":
        cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                       interpolation=None)
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        sections = {f.name: f for f in fields(cls)}
        values = {}
        for name in cp.sections():
            if name not in sections:
                raise ConfigError(f"unknown section [{name}]")
            proto = sections[name].default_factory()
            known = {f.name: f for f in fields(proto)}
            kw = {}
            for key, raw in cp[name].items():
                if key not in known:
                    raise ConfigError(f"unknown key {key!r} in [{name}]")
                kw[key] = _coerce(getattr(proto, key), raw, f"[{name}] {key}")
            try:
                values[name] = dataclasses.replace(proto, **kw)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"[{name}]: {exc}") from None
        return cls(**values)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_ini(fh.read())

    def to_ini(self) -> str:
        lines = []
        for sec in fields(self):
            lines.append(f"[{sec.name}]")
            obj = getattr(self, sec.name)
            for f in fields(obj):
                v = getattr(obj, f.name)
                if isinstance(v, tuple):
                    v = ",".join(str(x) for x in v)
                elif isinstance(v, bool):
                    v = "true" if v else "false"
                lines.append(f"{f.name} = {v}")
            lines.append("")
        return "\n".join(lines)


def _coerce(default, raw: str, where: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(type(default[0])(x) for x in raw.split(","))
        return raw
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {type(default).__name__}") from None
