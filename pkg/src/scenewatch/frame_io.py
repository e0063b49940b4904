"""Grayscale frame container plus PGM and Y4M codecs.

Everything downstream works on 8-bit single-plane images stored as
``(height, width)`` uint8 arrays.  Color sources are reduced to luma.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator

import numpy as np

DEFAULT_FRAME_RATE = 30.0

_Y4M_MAGIC = b"YUV4MPEG2 "
_Y4M_COLORSPACES = {"420", "420jpeg", "420mpeg2", "mono"}


class FormatError(ValueError):
    """Raised for malformed or unsupported image/stream data."""


class UnsupportedFormatError(FormatError):
    pass


class StreamError(FormatError):
    pass


def timestamp_ms(index: int, frame_rate: float) -> int:
    """Milliseconds from sequence start, rounded half up."""
    return int(np.floor(index * 1000.0 / frame_rate + 0.5))


@dataclass(eq=False)
class Frame:
    pixels: np.ndarray
    index: int = 0
    timestamp_ms: int = 0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"frame pixels must be a non-empty 2-D array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ValueError("intensities must lie in [0, 255]")
            px = px.astype(np.uint8)
        self.pixels = px

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.index == other.index
            and self.timestamp_ms == other.timestamp_ms
            and self.pixels.shape == other.pixels.shape
            and bool(np.array_equal(self.pixels, other.pixels))
        )

    def __repr__(self):
        return f"Frame({self.width}x{self.height}, index={self.index}, t={self.timestamp_ms}ms)"


@dataclass(frozen=True)
class FrameSource:
    kind: str  # "pgm_sequence" | "y4m_stream"
    width: int
    height: int
    frame_rate: float = DEFAULT_FRAME_RATE

    def __post_init__(self):
        if self.kind not in ("pgm_sequence", "y4m_stream"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if not self.frame_rate > 0:
            raise ValueError("frame_rate must be positive")


def luma_from_rgb(r, g, b):
    """Rec.601 luma, rounded half up and clamped to [0, 255].

    Accepts scalars or broadcastable arrays; scalars give back an ``int``.
    """
    y = 0.299 * np.asarray(r, dtype=np.float64) + 0.587 * np.asarray(g, dtype=np.float64) \
        + 0.114 * np.asarray(b, dtype=np.float64)
    y = np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)
    if y.ndim == 0:
        return int(y)
    return y


# --------------------------------------------------------------------------- PGM

def _pgm_token(data: bytes, pos: int, field: str) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos]
        if c == ord("#"):
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
        elif c in b" \t\r\n\v\f":
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in b" \t\r\n\v\f#":
        pos += 1
    if start == pos:
        raise FormatError(f"PGM header truncated: missing {field} at offset {start}")
    return data[start:pos], pos


def decode_pgm(data: bytes, index: int = 0, frame_rate: float = DEFAULT_FRAME_RATE) -> Frame:
    """Decode a binary (P5) PGM with maxval 255."""
    data = bytes(data)
    if not data.startswith(b"P5"):
        raise FormatError("PGM magic 'P5' not found at offset 0")
    pos = 2
    values = []
    for field in ("width", "height", "maxval"):
        tok, end = _pgm_token(data, pos, field)
        try:
            values.append(int(tok))
        except ValueError:
            raise FormatError(f"PGM {field} is not an integer at offset {pos}: {tok!r}") from None
        pos = end
    width, height, maxval = values
    if width < 1 or height < 1:
        raise FormatError(f"PGM dimensions must be positive, got {width}x{height}")
    if maxval != 255:
        raise FormatError(f"PGM maxval must be 255, got {maxval} (field maxval)")
    if pos >= len(data) or data[pos] not in b" \t\r\n\v\f":
        raise FormatError(f"PGM header must end with a single whitespace byte at offset {pos}")
    pos += 1
    need = width * height
    payload = data[pos:pos + need]
    if len(payload) < need:
        raise FormatError(
            f"PGM pixel data truncated at offset {pos}: expected {need} bytes, found {len(payload)}"
        )
    px = np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()
    return Frame(px, index=index, timestamp_ms=timestamp_ms(index, frame_rate))


def write_pgm(frame: Frame) -> bytes:
    header = b"P5\n%d %d\n255\n" % (frame.width, frame.height)
    return header + np.ascontiguousarray(frame.pixels, dtype=np.uint8).tobytes()


def read_pgm(path, index: int = 0, frame_rate: float = DEFAULT_FRAME_RATE) -> Frame:
    with open(path, "rb") as fh:
        return decode_pgm(fh.read(), index=index, frame_rate=frame_rate)


def save_pgm(frame: Frame, path) -> None:
    Path(path).write_bytes(write_pgm(frame))


def open_pgm_sequence(directory, frame_rate: float = DEFAULT_FRAME_RATE):
    """Open a directory of ``*.pgm`` files, ordered by file name."""
    files = sorted(p for p in Path(directory).iterdir() if p.suffix.lower() == ".pgm")
    if not files:
        raise FormatError(f"no .pgm files in {directory}")
    first = read_pgm(files[0])
    source = FrameSource("pgm_sequence", first.width, first.height, frame_rate)

    def frames() -> Iterator[Frame]:
        for i, path in enumerate(files):
            f = read_pgm(path, index=i, frame_rate=frame_rate)
            if f.shape != (source.height, source.width):
                raise FormatError(f"{path}: size {f.width}x{f.height} differs from sequence size")
            yield f

    return source, frames()


# --------------------------------------------------------------------------- Y4M

def _read_line(stream: BinaryIO, limit: int = 4096) -> bytes:
    buf = bytearray()
    while True:
        c = stream.read(1)
        if not c:
            break
        if c == b"\n":
            return bytes(buf)
        buf += c
        if len(buf) > limit:
            raise StreamError("Y4M header line too long")
    if buf:
        raise StreamError("Y4M line not terminated by LF")
    return b""


def _parse_rate(tok: str) -> float:
    num, _, den = tok.partition(":")
    try:
        n, d = int(num), int(den or 1)
    except ValueError:
        raise FormatError(f"bad Y4M frame rate {tok!r}") from None
    if n <= 0 or d <= 0:
        raise FormatError(f"bad Y4M frame rate {tok!r}")
    return n / d


def open_y4m(stream: BinaryIO, frame_rate: float | None = None):
    """Parse a Y4M header and return ``(FrameSource, frame_iterator)``.

    Only the luma plane of each frame is kept; chroma bytes are consumed
    and discarded.  The iterator never reads past the final frame.
    """
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    magic = stream.read(len(_Y4M_MAGIC))
    if magic != _Y4M_MAGIC:
        raise FormatError("Y4M stream must begin with 'YUV4MPEG2 '")
    params = _read_line(stream).decode("ascii", "replace").split()
    width = height = None
    rate = None
    colorspace = "420"
    for p in params:
        tag, val = p[0], p[1:]
        if tag == "W":
            width = int(val)
        elif tag == "H":
            height = int(val)
        elif tag == "F":
            rate = _parse_rate(val)
        elif tag == "C":
            colorspace = val
    if not width or not height or width < 1 or height < 1:
        raise FormatError("Y4M header lacks positive W and H parameters")
    if colorspace not in _Y4M_COLORSPACES:
        raise UnsupportedFormatError(f"unsupported Y4M colorspace C{colorspace}")
    if rate is None:
        rate = frame_rate or DEFAULT_FRAME_RATE
    source = FrameSource("y4m_stream", width, height, rate)
    luma = width * height
    chroma = 0 if colorspace == "mono" else 2 * ((width + 1) // 2) * ((height + 1) // 2)

    def frames() -> Iterator[Frame]:
        index = 0
        while True:
            head = stream.read(5)
            if not head:
                return
            if head != b"FRAME":
                raise StreamError(f"expected FRAME marker before frame {index}, got {head!r}")
            rest = _read_line(stream)
            if rest and not rest.startswith(b" "):
                raise StreamError(f"malformed FRAME marker before frame {index}")
            plane = stream.read(luma)
            if len(plane) < luma:
                raise StreamError(f"frame {index} truncated: luma plane has {len(plane)} of {luma} bytes")
            if chroma:
                skipped = stream.read(chroma)
                if len(skipped) < chroma:
                    raise StreamError(f"frame {index} truncated in chroma planes")
            px = np.frombuffer(plane, dtype=np.uint8).reshape(height, width).copy()
            yield Frame(px, index=index, timestamp_ms=timestamp_ms(index, rate))
            index += 1

    return source, frames()


def write_y4m(frames, stream: BinaryIO, frame_rate: int = 30, colorspace: str = "mono") -> None:
    """Write frames as a Y4M stream (chroma planes filled with 128)."""
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to write")
    w, h = frames[0].width, frames[0].height
    stream.write(b"YUV4MPEG2 W%d H%d F%d:1 Ip A1:1 C%s\n" % (w, h, frame_rate, colorspace.encode()))
    chroma = b"" if colorspace == "mono" else bytes([128]) * (2 * ((w + 1) // 2) * ((h + 1) // 2))
    for f in frames:
        stream.write(b"FRAME\n")
        stream.write(f.pixels.tobytes())
        stream.write(chroma)


def open_input(path, frame_rate: float | None = None):
    """Open a PGM directory or a ``.y4m`` file."""
    path = Path(path)
    if path.is_dir():
        return open_pgm_sequence(path, frame_rate or DEFAULT_FRAME_RATE)
    if path.suffix.lower() == ".y4m":
        fh = open(path, "rb")
        source, it = open_y4m(fh, frame_rate)

        def frames():
            try:
                yield from it
            finally:
                fh.close()

        return source, frames()
    if path.suffix.lower() == ".pgm" and os.path.isfile(path):
        f = read_pgm(path)
        return FrameSource("pgm_sequence", f.width, f.height, frame_rate or DEFAULT_FRAME_RATE), iter([f])
    raise FormatError(f"unrecognised input {path} (expected a PGM directory or .y4m file)")
