"""Raw planar video input: YUV4MPEG2 (Y4M) and headerless YUV.

Frames are normalized to [0, 1] (code / (2**bit_depth - 1)) and chroma is
upsampled to luma resolution by nearest-neighbour replication.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import BinaryIO, Iterator, Optional, Sequence

import numpy as np

from .errors import HeaderParseError, TruncatedFrameError, UnsupportedFormatError

Y4M_MAGIC = b"YUV4MPEG2"
FRAME_TAG = b"FRAME"

# chroma plane divisors (horizontal, vertical)
SUBSAMPLING = {"420": (2, 2), "422": (2, 1), "444": (1, 1)}

_Y4M_COLORSPACES = {
    "420": ("420", 8),
    "420jpeg": ("420", 8),
    "420paldv": ("420", 8),
    "420mpeg2": ("420", 8),
    "422": ("422", 8),
    "444": ("444", 8),
    "420p10": ("420", 10),
    "422p10": ("422", 10),
    "444p10": ("444", 10),
}

_PIX_FMTS = {
    "yuv420p": ("420", 8),
    "yuv422p": ("422", 8),
    "yuv444p": ("444", 8),
    "yuv420p10le": ("420", 10),
    "yuv422p10le": ("422", 10),
    "yuv444p10le": ("444", 10),
}


@dataclass(frozen=True)
class VideoHeader:
    width: int
    height: int
    frame_rate: Fraction = Fraction(30, 1)
    chroma_subsampling: str = "420"
    bit_depth: int = 8
    frame_count: Optional[int] = None

    def __post_init__(self):
        if self.chroma_subsampling not in SUBSAMPLING:
            raise UnsupportedFormatError(
                f"unsupported chroma subsampling {self.chroma_subsampling!r}"
            )
        if self.bit_depth not in (8, 10):
            raise UnsupportedFormatError(f"unsupported bit depth {self.bit_depth}")
        if self.width <= 0 or self.height <= 0:
            raise UnsupportedFormatError(f"invalid geometry {self.width}x{self.height}")

    @property
    def chroma_shape(self):
        sx, sy = SUBSAMPLING[self.chroma_subsampling]
        return (-(-self.height // sy), -(-self.width // sx))

    @property
    def bytes_per_sample(self):
        return 1 if self.bit_depth == 8 else 2

    @property
    def frame_bytes(self):
        ch, cw = self.chroma_shape
        return (self.width * self.height + 2 * ch * cw) * self.bytes_per_sample


@dataclass(frozen=True)
class RawFormat:
    """Geometry hint for headerless .yuv input."""

    width: int
    height: int
    chroma_subsampling: str = "420"
    bit_depth: int = 8
    frame_rate: Fraction = Fraction(30, 1)

    @classmethod
    def from_pix_fmt(cls, width, height, pix_fmt="yuv420p", bit_depth=None, frame_rate=None):
        try:
            sub, depth = _PIX_FMTS[pix_fmt]
        except KeyError:
            raise UnsupportedFormatError(f"unsupported pixel format {pix_fmt!r}") from None
        return cls(
            width,
            height,
            sub,
            bit_depth if bit_depth is not None else depth,
            Fraction(frame_rate) if frame_rate is not None else Fraction(30, 1),
        )


@dataclass(frozen=True, eq=False)
class PlanarFrame:
    y_plane: np.ndarray
    cb_plane: np.ndarray
    cr_plane: np.ndarray
    index: int

    @property
    def shape(self):
        return self.y_plane.shape


@dataclass(frozen=True, eq=False)
class FrameGroup:
    frames: tuple
    group_index: int

    def __len__(self):
        return len(self.frames)

    def luma_stack(self):
        return np.stack([f.y_plane for f in self.frames])


def parse_y4m_header(line: bytes, offset: int = 0, frame_count=None) -> VideoHeader:
    """Parse one Y4M stream header line (without its trailing newline)."""
    if not line.startswith(Y4M_MAGIC):
        raise HeaderParseError("missing YUV4MPEG2 signature", offset)
    fields = {}
    pos = len(Y4M_MAGIC)
    for token in line[pos:].split(b" "):
        if token:
            key = chr(token[0])
            value = token[1:].decode("ascii", errors="replace")
            if key == "X":
                fields.setdefault("X", []).append(value)
            else:
                fields[key] = (value, offset + pos)
        pos += len(token) + 1

    end = offset + len(line)
    for key in ("W", "H"):
        if key not in fields:
            raise HeaderParseError(f"missing mandatory field {key}", end)
    try:
        width = int(fields["W"][0])
        height = int(fields["H"][0])
    except ValueError:
        bad = "W" if not fields["W"][0].isdigit() else "H"
        raise HeaderParseError(f"invalid {bad} value", fields[bad][1]) from None

    frame_rate = Fraction(30, 1)
    if "F" in fields:
        value, at = fields["F"]
        try:
            num, den = value.split(":")
            frame_rate = Fraction(int(num), int(den))
        except (ValueError, ZeroDivisionError):
            raise HeaderParseError(f"invalid frame rate {value!r}", at) from None

    colorspace = fields.get("C", ("420", None))[0]
    if colorspace not in _Y4M_COLORSPACES:
        raise UnsupportedFormatError(f"unsupported Y4M colorspace C{colorspace}")
    sub, depth = _Y4M_COLORSPACES[colorspace]
    return VideoHeader(width, height, frame_rate, sub, depth, frame_count)


def _upsample(plane, shape, sub):
    sx, sy = SUBSAMPLING[sub]
    if sx == 1 and sy == 1:
        return plane
    out = np.repeat(np.repeat(plane, sy, axis=0), sx, axis=1)
    return out[: shape[0], : shape[1]]


class VideoReader:
    """Sequential frame reader over a Y4M or raw planar YUV stream."""

    def __init__(self, stream: BinaryIO, format_hint: Optional[RawFormat] = None, *, close=False):
        self._stream = stream
        self._close = close
        self._frames_read = 0
        self._offset = 0
        if format_hint is None:
            self.header = self._read_y4m_header()
            self.is_y4m = True
        else:
            self.header = VideoHeader(
                format_hint.width,
                format_hint.height,
                format_hint.frame_rate,
                format_hint.chroma_subsampling,
                format_hint.bit_depth,
                self._raw_frame_count(format_hint),
            )
            self.is_y4m = False
        self._peak = float(2 ** self.header.bit_depth - 1)

    def _raw_frame_count(self, hint):
        try:
            size = os.fstat(self._stream.fileno()).st_size
        except (AttributeError, OSError, io.UnsupportedOperation):
            return None
        tmp = VideoHeader(hint.width, hint.height, hint.frame_rate,
                          hint.chroma_subsampling, hint.bit_depth)
        return size // tmp.frame_bytes

    def _readline(self, limit=4096):
        buf = bytearray()
        while len(buf) < limit:
            ch = self._stream.read(1)
            if not ch:
                return bytes(buf), False
            if ch == b"\n":
                return bytes(buf), True
            buf += ch
        return bytes(buf), False

    def _read_y4m_header(self):
        line, terminated = self._readline()
        if not line:
            raise HeaderParseError("empty stream", 0)
        if not terminated:
            # a header cut off before its newline may still lack fields; parse
            # it for the more specific message, then flag the truncation
            parse_y4m_header(line, 0)
            raise HeaderParseError("unterminated stream header", len(line))
        self._offset = len(line) + 1
        return parse_y4m_header(line, 0)

    def read_frame(self) -> Optional[PlanarFrame]:
        """Return the next frame, or None at a clean end of stream."""
        hdr = self.header
        if self.is_y4m:
            start = self._offset
            line, terminated = self._readline()
            if not line and not terminated:
                return None
            if not line.startswith(FRAME_TAG) or not terminated:
                raise HeaderParseError("expected FRAME marker", start)
            self._offset += len(line) + 1
        data = self._stream.read(hdr.frame_bytes)
        if not data and not self.is_y4m:
            return None
        if len(data) < hdr.frame_bytes:
            raise TruncatedFrameError(self._frames_read, hdr.frame_bytes, len(data))
        self._offset += len(data)

        dtype = np.uint8 if hdr.bit_depth == 8 else np.dtype("<u2")
        samples = np.frombuffer(data, dtype=dtype)
        ny = hdr.width * hdr.height
        ch, cw = hdr.chroma_shape
        nc = ch * cw
        y = samples[:ny].reshape(hdr.height, hdr.width)
        cb = samples[ny : ny + nc].reshape(ch, cw)
        cr = samples[ny + nc :].reshape(ch, cw)
        shape = (hdr.height, hdr.width)
        frame = PlanarFrame(
            y.astype(np.float64) / self._peak,
            _upsample(cb, shape, hdr.chroma_subsampling).astype(np.float64) / self._peak,
            _upsample(cr, shape, hdr.chroma_subsampling).astype(np.float64) / self._peak,
            self._frames_read,
        )
        self._frames_read += 1
        return frame

    def __iter__(self) -> Iterator[PlanarFrame]:
        while True:
            frame = self.read_frame()
            if frame is None:
                return
            yield frame

    def next_group(self, size: int = 5) -> Optional[FrameGroup]:
        """Next ``size`` consecutive frames; a trailing partial group is dropped."""
        first = self._frames_read
        frames = []
        for _ in range(size):
            frame = self.read_frame()
            if frame is None:
                return None
            frames.append(frame)
        return FrameGroup(tuple(frames), first // size)

    def groups(self, size: int = 5) -> Iterator[FrameGroup]:
        while True:
            group = self.next_group(size)
            if group is None:
                return
            yield group

    def close(self):
        if self._close:
            self._stream.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def open_video(path_or_stream, format_hint: Optional[RawFormat] = None) -> VideoReader:
    """Open a Y4M file/stream, or headerless YUV when ``format_hint`` is given.

    The returned reader exposes the parsed :class:`VideoHeader` as ``.header``
    and is positioned at the first frame.
    """
    if isinstance(path_or_stream, (str, os.PathLike)):
        stream = open(path_or_stream, "rb")
        try:
            return VideoReader(stream, format_hint, close=True)
        except Exception:
            stream.close()
            raise
    return VideoReader(path_or_stream, format_hint)


def next_group(reader: VideoReader, size: int = 5) -> Optional[FrameGroup]:
    return reader.next_group(size)


def read_groups(path_or_stream, size=5, format_hint=None):
    """Convenience: header plus the list of all complete groups."""
    with open_video(path_or_stream, format_hint) as reader:
        return reader.header, list(reader.groups(size))


def subsample_chroma(plane: np.ndarray, sub: str) -> np.ndarray:
    """Decimate a full-resolution chroma plane by taking the top-left sample."""
    sx, sy = SUBSAMPLING[sub]
    return plane[::sy, ::sx]


def to_codes(plane: np.ndarray, bit_depth: int = 8) -> np.ndarray:
    peak = 2**bit_depth - 1
    dtype = np.uint8 if bit_depth == 8 else np.uint16
    return np.clip(np.rint(np.asarray(plane) * peak), 0, peak).astype(dtype)


def write_y4m(
    path_or_stream,
    frames: Sequence,
    width: int,
    height: int,
    frame_rate=(30, 1),
    chroma_subsampling="420",
    bit_depth=8,
):
    """Write integer-coded planar frames ``(y, cb, cr)`` at native plane sizes."""
    tag = chroma_subsampling if bit_depth == 8 else f"{chroma_subsampling}p10"
    header = f"YUV4MPEG2 W{width} H{height} F{frame_rate[0]}:{frame_rate[1]} Ip A1:1 C{tag}\n"
    own = isinstance(path_or_stream, (str, os.PathLike))
    out = open(path_or_stream, "wb") if own else path_or_stream
    dtype = np.uint8 if bit_depth == 8 else np.dtype("<u2")
    try:
        out.write(header.encode("ascii"))
        for y, cb, cr in frames:
            out.write(FRAME_TAG + b"\n")
            for plane in (y, cb, cr):
                out.write(np.ascontiguousarray(plane, dtype=dtype).tobytes())
    finally:
        if own:
            out.close()


def write_raw_yuv(path_or_stream, frames, bit_depth=8):
    own = isinstance(path_or_stream, (str, os.PathLike))
    out = open(path_or_stream, "wb") if own else path_or_stream
    dtype = np.uint8 if bit_depth == 8 else np.dtype("<u2")
    try:
        for planes in frames:
            for plane in planes:
                out.write(np.ascontiguousarray(plane, dtype=dtype).tobytes())
    finally:
        if own:
            out.close()


def encode_frames(lumas, cbs=None, crs=None, chroma_subsampling="420", bit_depth=8):
    """Turn normalized full-resolution planes into writer-ready code planes."""
    mid = 2 ** (bit_depth - 1) / (2**bit_depth - 1)
    out = []
    for i, y in enumerate(lumas):
        cb = cbs[i] if cbs is not None else np.full_like(y, mid)
        cr = crs[i] if crs is not None else np.full_like(y, mid)
        out.append(
            (
                to_codes(y, bit_depth),
                to_codes(subsample_chroma(cb, chroma_subsampling), bit_depth),
                to_codes(subsample_chroma(cr, chroma_subsampling), bit_depth),
            )
        )
    return out
