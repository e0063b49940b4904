"""Clip storage (PGM frame directories with checksummed manifests) and an
append-only JSON-lines event index with full-scan queries."""

from __future__ import annotations

import json
import zlib
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .frame_io import Frame, decode_pgm, write_pgm

EVENT_KINDS = ("clip", "track", "activity")


class IndexFormatError(ValueError):
    pass


class ChecksumError(IOError):
    pass


@dataclass(frozen=True)
class EventRecord:
    kind: str
    clip_id: int
    track_id: int
    frame_start: int
    frame_end: int
    t_start_ms: int
    t_end_ms: int
    class_label: str = ""
    activity_label: str = ""
    bbox_first: list | None = None
    bbox_last: list | None = None
    source: str = ""

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.frame_start > self.frame_end:
            raise ValueError("frame_start must not exceed frame_end")
        if self.t_start_ms > self.t_end_ms:
            raise ValueError("t_start_ms must not exceed t_end_ms")

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "EventRecord":
        names = {f.name for f in fields(cls)}
        if set(d) != names:
            missing, extra = names - set(d), set(d) - names
            raise ValueError(f"bad record fields (missing {sorted(missing)}, unexpected {sorted(extra)})")
        for key in ("bbox_first", "bbox_last"):
            if d[key] is not None:
                d[key] = list(d[key])
        return cls(**d)


@dataclass(frozen=True)
class QueryFilter:
    time_range: tuple[int, int] | None = None
    frame_range: tuple[int, int] | None = None
    class_label: str | None = None
    activity_label: str | None = None
    kind: str | None = None

    def __post_init__(self):
        if self.time_range is not None and self.frame_range is not None:
            raise ValueError("give a time range or a frame range, not both")

    def matches(self, r: EventRecord) -> bool:
        if self.kind is not None and r.kind != self.kind:
            return False
        if self.class_label is not None and r.class_label != self.class_label:
            return False
        if self.activity_label is not None and r.activity_label != self.activity_label:
            return False
        if self.time_range is not None:
            lo, hi = self.time_range
            if not (r.t_start_ms <= hi and lo <= r.t_end_ms):
                return False
        if self.frame_range is not None:
            lo, hi = self.frame_range
            if not (r.frame_start <= hi and lo <= r.frame_end):
                return False
        return True


class EventIndex:
    """Single writer for an index file; every record is flushed as written."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "a", encoding="utf-8", newline="\n")

    def append(self, record: EventRecord) -> None:
        self._fh.write(record.to_json() + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def append_event(index_path, record: EventRecord) -> None:
    with EventIndex(index_path) as idx:
        idx.append(record)


def scan(index_path) -> list[EventRecord]:
    out = []
    with open(index_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(EventRecord.from_dict(json.loads(line)))
            except (ValueError, TypeError) as exc:
                raise IndexFormatError(f"{index_path}:{lineno}: {exc}") from None
    return out


def query(index_path, flt: QueryFilter | None = None) -> list[EventRecord]:
    """Records matching every present filter field, ordered by
    ``(t_start_ms, clip_id, track_id)``."""
    flt = flt or QueryFilter()
    hits = [r for r in scan(index_path) if flt.matches(r)]
    hits.sort(key=lambda r: (r.t_start_ms, r.clip_id, r.track_id))
    return hits


# ------------------------------------------------------------------ clips

@dataclass(frozen=True)
class ClipManifest:
    clip_id: int
    frame_start: int
    frame_end: int
    files: tuple  # ((name, crc32), ...)

    def to_json(self) -> str:
        return json.dumps({
            "clip_id": self.clip_id,
            "frame_start": self.frame_start,
            "frame_end": self.frame_end,
            "files": [{"name": n, "crc32": c} for n, c in self.files],
        }, indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ClipManifest":
        d = json.loads(text)
        return cls(d["clip_id"], d["frame_start"], d["frame_end"],
                   tuple((f["name"], f["crc32"]) for f in d["files"]))


def clip_dir(out_dir, clip_id: int) -> Path:
    return Path(out_dir) / f"clip_{clip_id}"


def frame_name(index: int) -> str:
    return f"frame_{index:06d}.pgm"


class ClipWriter:
    """Streams one clip's frames to disk, then seals it with a manifest."""

    def __init__(self, out_dir, clip_id: int):
        self.clip_id = clip_id
        self.dir = clip_dir(out_dir, clip_id)
        self.files: list[tuple[str, int]] = []
        self.first = self.last = None
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create clip directory {self.dir}: {exc}") from exc

    def add(self, frame: Frame) -> None:
        if self.last is not None and frame.index != self.last + 1:
            raise ValueError(f"clip {self.clip_id}: frame {frame.index} does not follow {self.last}")
        data = write_pgm(frame)
        name = frame_name(frame.index)
        path = self.dir / name
        try:
            path.write_bytes(data)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc}") from exc
        self.files.append((name, zlib.crc32(data)))
        if self.first is None:
            self.first = frame.index
        self.last = frame.index

    def close(self) -> ClipManifest:
        if self.first is None:
            raise ValueError(f"clip {self.clip_id} has no frames")
        manifest = ClipManifest(self.clip_id, self.first, self.last, tuple(self.files))
        (self.dir / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
        return manifest


def write_clip(frames, clip_id: int, out_dir) -> ClipManifest:
    frames = list(frames)
    if not frames:
        raise ValueError("a clip needs at least one frame")
    writer = ClipWriter(out_dir, clip_id)
    for f in frames:
        writer.add(f)
    return writer.close()


def read_clip(directory, frame_rate: float = 30.0) -> tuple[ClipManifest, list[Frame]]:
    """Load a clip and verify every file against its manifest checksum."""
    directory = Path(directory)
    manifest = ClipManifest.from_json((directory / "manifest.json").read_text(encoding="utf-8"))
    frames = []
    for offset, (name, crc) in enumerate(manifest.files):
        data = (directory / name).read_bytes()
        if zlib.crc32(data) != crc:
            raise ChecksumError(f"checksum mismatch for {directory / name}")
        frames.append(decode_pgm(data, index=manifest.frame_start + offset, frame_rate=frame_rate))
    return manifest, frames
