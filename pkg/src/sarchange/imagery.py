"""Rasters, binary PGM input/output, the log-ratio difference image, and
two-channel patch extraction for the classifier.

Only binary (P5) PGM is supported: 8-bit when maxval fits a byte, otherwise
16-bit big-endian, maxval capped at 65535. Saving a float raster rounds to
the nearest integer.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autodiff import Tensor

_WHITESPACE = frozenset(b" \t\n\r\x0b\x0c")


class PgmError(ValueError):
    """Malformed PGM content; message carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte {offset})")
        self.offset = offset


class Raster:
    """A single-band image; pixels are finite, non-negative float64."""

    __slots__ = ("pixels", "_max")

    def __init__(self, pixels):
        arr = np.ascontiguousarray(pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"raster must be 2-D, got {arr.ndim} axes")
        if arr.size == 0:
            raise ValueError("raster must be non-empty")
        if not np.isfinite(arr).all():
            raise ValueError("raster pixels must be finite")
        if (arr < 0.0).any():
            raise ValueError("raster pixels must be non-negative")
        self.pixels = arr
        self._max = None

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def max_value(self) -> float:
        if self._max is None:
            self._max = float(self.pixels.max())
        return self._max

    def __repr__(self):
        return f"Raster({self.height}x{self.width})"


@dataclass
class DifferenceImage:
    """Normalized log-ratio image; values lie in [0, 1], row-major."""

    values: np.ndarray

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class Patch:
    """Two-channel r x r window centered on a pixel, each channel scaled
    to [0, 1] by its image maximum."""

    center: tuple[int, int]
    r: int
    data: Tensor  # (2, r, r)


def _next_token(data: bytes, pos: int) -> tuple[bytes, int]:
    n = len(data)
    while pos < n:
        c = data[pos]
        if c in _WHITESPACE:
            pos += 1
        elif c == 0x23:  # '#' comment runs to end of line
            while pos < n and data[pos] not in (0x0A, 0x0D):
                pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in _WHITESPACE:
        pos += 1
    if start == pos:
        raise PgmError("unexpected end of header", start)
    return data[start:pos], pos


def _header_int(data: bytes, pos: int, name: str) -> tuple[int, int]:
    tok, end = _next_token(data, pos)
    if not tok.isdigit():
        raise PgmError(f"{name} must be a decimal integer, got {tok!r}", end - len(tok))
    return int(tok), end


def load_pgm(path) -> Raster:
    """Read a binary PGM (P5) file; 16-bit payloads are big-endian."""
    data = Path(path).read_bytes()
    magic, pos = _next_token(data, 0)
    if magic != b"P5":
        raise PgmError(f"unsupported magic {magic!r}, only binary P5 is handled", 0)
    width, pos = _header_int(data, pos, "width")
    height, pos = _header_int(data, pos, "height")
    maxval, pos = _header_int(data, pos, "maxval")
    if width < 1 or height < 1:
        raise PgmError(f"degenerate size {width}x{height}", pos)
    if not 1 <= maxval <= 65535:
        raise PgmError(f"maxval {maxval} out of range 1..65535", pos)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise PgmError("expected single whitespace before payload", pos)
    pos += 1
    two_byte = maxval > 255
    expected = width * height * (2 if two_byte else 1)
    payload = data[pos:pos + expected]
    if len(payload) < expected:
        raise PgmError(
            f"payload truncated: need {expected} bytes, have {len(payload)}",
            pos + len(payload),
        )
    dtype = np.dtype(">u2") if two_byte else np.dtype("u1")
    values = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return Raster(values.astype(np.float64))


def save_pgm(raster: Raster, path) -> None:
    """Write a binary PGM; float pixels round to nearest integer."""
    values = np.rint(raster.pixels).astype(np.int64)
    top = int(values.max())
    if top > 65535:
        raise ValueError(f"pixel value {top} exceeds the 16-bit PGM ceiling")
    maxval = 255 if top <= 255 else 65535
    dtype = np.dtype("u1") if maxval == 255 else np.dtype(">u2")
    header = f"P5\n{raster.width} {raster.height}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + values.astype(dtype).tobytes())


def log_ratio(i1: Raster, i2: Raster) -> DifferenceImage:
    """Pixel-wise |ln(a+1) - ln(b+1)|, min-max normalized to [0, 1].

    A constant raw image (identical inputs included) normalizes to zeros.
    """
    if i1.pixels.shape != i2.pixels.shape:
        raise ValueError(
            f"image sizes differ: {i1.height}x{i1.width} vs {i2.height}x{i2.width}"
        )
    raw = np.abs(np.log1p(i1.pixels) - np.log1p(i2.pixels))
    lo = raw.min()
    span = raw.max() - lo
    if span == 0.0:
        return DifferenceImage(np.zeros_like(raw))
    return DifferenceImage((raw - lo) / span)


def extract_patch(i1: Raster, i2: Raster, center: tuple[int, int], r: int) -> Patch:
    """Two-channel window (i1 then i2) with edge replication at borders."""
    if r < 1 or r % 2 == 0:
        raise ValueError(f"patch size must be odd and positive, got {r}")
    if i1.pixels.shape != i2.pixels.shape:
        raise ValueError(
            f"image sizes differ: {i1.height}x{i1.width} vs {i2.height}x{i2.width}"
        )
    row, col = int(center[0]), int(center[1])
    if not (0 <= row < i1.height and 0 <= col < i1.width):
        raise ValueError(f"center {center} outside raster {i1.height}x{i1.width}")
    half = r // 2
    rows = np.clip(np.arange(row - half, row + half + 1), 0, i1.height - 1)
    cols = np.clip(np.arange(col - half, col + half + 1), 0, i1.width - 1)
    window = np.ix_(rows, cols)
    channels = np.empty((2, r, r), dtype=np.float64)
    for k, img in enumerate((i1, i2)):
        top = img.max_value()
        channels[k] = img.pixels[window] / (top if top > 0.0 else 1.0)
    return Patch(center=(row, col), r=r, data=Tensor(channels))
