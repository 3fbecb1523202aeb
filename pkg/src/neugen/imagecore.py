"""Image container, PNG and NGF1 I/O, channel utilities.

Images are held as float64 arrays of shape ``(height, width, channels)``
with nominal range [0, 1]. The NGF1 format stores the same samples
losslessly (as float32) in plane-major order::

    b"NGF1" | u32 width | u32 height | u32 channels | f32 samples...

all little-endian, plane 0 rows first, then plane 1, and so on.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np
import png

from .errors import DimensionMismatch, InvalidChannelCount, UnsupportedFormat

__all__ = [
    "ImageF",
    "load_image",
    "save_image",
    "to_grayscale",
    "broadcast_channel",
    "read_ngf1",
    "write_ngf1",
    "LUMA_WEIGHTS",
]

LUMA_WEIGHTS = (0.299, 0.587, 0.114)

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_NGF1_MAGIC = b"NGF1"
_NGF1_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, eq=False)
class ImageF:
    """Immutable float image, ``data.shape == (height, width, channels)``."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected a 2-D or 3-D array, got shape {arr.shape}")
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise ValueError(f"image must be at least 1x1, got {w}x{h}")
        if c not in (1, 3):
            raise InvalidChannelCount(f"channels must be 1 or 3, got {c}")
        if arr is self.data or not arr.flags.owndata:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def plane(self, c: int) -> np.ndarray:
        """Return channel ``c`` as a read-only ``(height, width)`` view."""
        return self.data[:, :, c]

    def clamp(self) -> ImageF:
        return ImageF(np.clip(self.data, 0.0, 1.0))

    def same_size(self, other: ImageF) -> bool:
        return self.height == other.height and self.width == other.width

    def __repr__(self):
        return f"ImageF({self.width}x{self.height}x{self.channels})"


def check_same_size(a: ImageF, b: ImageF, *, channels: bool = True) -> None:
    if not a.same_size(b) or (channels and a.channels != b.channels):
        raise DimensionMismatch(f"{a!r} vs {b!r}")


def load_image(path) -> ImageF:
    """Read an 8- or 16-bit gray/RGB PNG into [0, 1] floats.

    Alpha is dropped. Palette images, other bit depths and non-PNG files
    raise :class:`UnsupportedFormat`.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise FileNotFoundError(path)
    with open(path, "rb") as fh:
        if fh.read(8) != _PNG_SIGNATURE:
            raise UnsupportedFormat(f"{path}: not a PNG file")
    try:
        width, height, rows, info = png.Reader(filename=path).read()
        if info.get("palette") is not None:
            raise UnsupportedFormat(f"{path}: palette PNGs are not supported")
        depth = info["bitdepth"]
        if depth not in (8, 16):
            raise UnsupportedFormat(f"{path}: bit depth {depth} is not supported")
        planes = info["planes"]
        arr = np.vstack([np.asarray(r, dtype=np.float64) for r in rows])
    except png.Error as exc:
        raise UnsupportedFormat(f"{path}: {exc}") from exc
    arr = arr.reshape(height, width, planes)
    if info["alpha"]:
        arr = arr[:, :, :-1]
    if arr.shape[2] not in (1, 3):
        raise UnsupportedFormat(f"{path}: {arr.shape[2]} colour channels")
    return ImageF(arr / float(2**depth - 1))


def save_image(img: ImageF, path, depth: int = 8) -> None:
    """Write ``img`` as PNG after clamping to [0, 1] and rounding."""
    if depth not in (8, 16):
        raise ValueError(f"depth must be 8 or 16, got {depth}")
    maxv = 2**depth - 1
    q = np.rint(np.clip(img.data, 0.0, 1.0) * maxv)
    q = q.astype(np.uint16 if depth == 16 else np.uint8)
    writer = png.Writer(
        width=img.width, height=img.height, greyscale=img.channels == 1, bitdepth=depth
    )
    rows = q.reshape(img.height, img.width * img.channels)
    with open(path, "wb") as fh:
        writer.write(fh, rows)


def to_grayscale(img: ImageF) -> ImageF:
    """Luma (0.299, 0.587, 0.114) for RGB; identity for 1-channel input."""
    if img.channels == 1:
        return img
    return ImageF(img.data @ np.asarray(LUMA_WEIGHTS))


def broadcast_channel(gmap: ImageF, channels: int) -> ImageF:
    if gmap.channels != 1:
        raise InvalidChannelCount(f"expected a 1-channel map, got {gmap.channels}")
    if channels not in (1, 3):
        raise InvalidChannelCount(f"channels must be 1 or 3, got {channels}")
    if channels == 1:
        return gmap
    return ImageF(np.repeat(gmap.data, channels, axis=2))


def write_ngf1(img: ImageF, path) -> None:
    header = _NGF1_HEADER.pack(_NGF1_MAGIC, img.width, img.height, img.channels)
    planar = np.ascontiguousarray(img.data.transpose(2, 0, 1), dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(planar.tobytes())


def read_ngf1(path) -> ImageF:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _NGF1_HEADER.size:
        raise UnsupportedFormat(f"{path}: truncated NGF1 header")
    magic, width, height, channels = _NGF1_HEADER.unpack_from(raw)
    if magic != _NGF1_MAGIC:
        raise UnsupportedFormat(f"{path}: bad magic {magic!r}")
    expected = width * height * channels * 4
    body = raw[_NGF1_HEADER.size:]
    if len(body) != expected:
        raise UnsupportedFormat(f"{path}: expected {expected} payload bytes, got {len(body)}")
    planar = np.frombuffer(body, dtype="<f4").reshape(channels, height, width)
    return ImageF(planar.transpose(1, 2, 0).astype(np.float64))
