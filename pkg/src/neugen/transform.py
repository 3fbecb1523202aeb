"""Patch-contrast normalization (NeuGen) and weighted fusion.

Every pixel gets the mean and population standard deviation of the
``s x s`` window centred on it, taken jointly over all channels
(``s*s*C`` samples, reflect-padded at the borders). Dividing the std map
by its global maximum gives the single-channel contrast map; adding a
weighted copy of that map to each channel of the input gives the
enhanced image.

Two routes compute the window statistics. :func:`patch_stats` visits all
``s*s`` offsets and does a two-pass mean/deviation sum; it is the
reference. :func:`windowed_stats_fast` uses summed-area tables of ``x``
and ``x**2`` and costs O(1) per pixel regardless of ``s``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DimensionMismatch, InvalidChannelCount, InvalidPatchSize, PatchTooLarge
from .imagecore import ImageF

__all__ = [
    "NeuGenConfig",
    "StatsMap",
    "NeuGenMap",
    "DEGENERATE_EPS",
    "patch_stats",
    "windowed_stats_fast",
    "neugen_map",
    "fuse",
    "neugen_enhance",
]

DEGENERATE_EPS = 1e-12
BORDER_MODES = ("reflect",)
CHANNEL_MODES = ("joint",)


@dataclass(frozen=True)
class NeuGenConfig:
    patch_size: int = 3
    fusion_weight: float = 0.5
    border: str = "reflect"
    channel_mode: str = "joint"

    def __post_init__(self):
        _check_patch_size(self.patch_size)
        if not self.fusion_weight >= 0:
            raise ValueError(f"fusion_weight must be >= 0, got {self.fusion_weight}")
        if self.border not in BORDER_MODES:
            raise ValueError(f"unsupported border policy {self.border!r}")
        if self.channel_mode not in CHANNEL_MODES:
            raise ValueError(f"unsupported channel mode {self.channel_mode!r}")


@dataclass(frozen=True)
class StatsMap:
    """Per-pixel window mean and std (1-channel images) plus ``z = max(std)``."""

    mean: ImageF
    std: ImageF
    z: float


class NeuGenMap(NamedTuple):
    image: ImageF
    z: float
    degenerate: bool


def _check_patch_size(s) -> None:
    if int(s) != s or s < 3 or s % 2 == 0:
        raise InvalidPatchSize(f"patch size must be an odd integer >= 3, got {s}")


def _padded(img: ImageF, s: int, border: str) -> np.ndarray:
    _check_patch_size(s)
    if border not in BORDER_MODES:
        raise ValueError(f"unsupported border policy {border!r}")
    limit = min(2 * img.width - 1, 2 * img.height - 1)
    if s > limit:
        raise PatchTooLarge(f"patch size {s} exceeds {limit} for {img!r}")
    r = s // 2
    padded = np.pad(img.data, ((r, r), (r, r), (0, 0)), mode=border)
    # joint statistics ignore channel order; sorting makes the sums ignore it too
    if padded.shape[2] > 1:
        padded.sort(axis=2)
    return padded


def _stats(mean: np.ndarray, std: np.ndarray) -> StatsMap:
    return StatsMap(mean=ImageF(mean), std=ImageF(std), z=float(std.max()))


def patch_stats(img: ImageF, s: int = 3, border: str = "reflect") -> StatsMap:
    """Reference window statistics: explicit sum over every window offset."""
    padded = _padded(img, s, border)
    # Shifting by one sample leaves the std unchanged and keeps flat regions exact.
    offset = padded[0, 0, 0]
    padded = padded - offset
    h, w, c = img.shape
    n = s * s * c

    total = np.zeros((h, w))
    for dy in range(s):
        for dx in range(s):
            total += padded[dy:dy + h, dx:dx + w].sum(axis=2)
    mean = total / n

    sq = np.zeros((h, w))
    for dy in range(s):
        for dx in range(s):
            dev = padded[dy:dy + h, dx:dx + w] - mean[:, :, None]
            sq += (dev * dev).sum(axis=2)
    return _stats(mean + offset, np.sqrt(sq / n))


def _box_sum(x: np.ndarray, s: int) -> np.ndarray:
    sat = np.zeros((x.shape[0] + 1, x.shape[1] + 1))
    np.cumsum(x, axis=0, out=sat[1:, 1:])
    np.cumsum(sat[1:, 1:], axis=1, out=sat[1:, 1:])
    return sat[s:, s:] - sat[:-s, s:] - sat[s:, :-s] + sat[:-s, :-s]


def windowed_stats_fast(img: ImageF, s: int = 3, border: str = "reflect") -> StatsMap:
    """Window statistics from summed-area tables, O(1) per pixel."""
    padded = _padded(img, s, border)
    offset = padded[0, 0, 0]
    padded = padded - offset
    n = s * s * img.channels

    mean = _box_sum(padded.sum(axis=2), s) / n
    mean_sq = _box_sum((padded * padded).sum(axis=2), s) / n
    var = np.maximum(mean_sq - mean * mean, 0.0)
    return _stats(mean + offset, np.sqrt(var))


def neugen_map(img: ImageF, cfg: NeuGenConfig | None = None, *, method: str = "fast") -> NeuGenMap:
    """Contrast map ``std / max(std)``, one channel, values in [0, 1].

    Returns the map together with ``z`` and a ``degenerate`` flag. When
    ``z <= DEGENERATE_EPS`` (a flat image) the map is all zeros and the
    flag is set instead of dividing by ~0.
    """
    cfg = cfg or NeuGenConfig()
    if method == "fast":
        stats = windowed_stats_fast(img, cfg.patch_size, cfg.border)
    elif method == "naive":
        stats = patch_stats(img, cfg.patch_size, cfg.border)
    else:
        raise ValueError(f"unknown method {method!r}")
    if stats.z <= DEGENERATE_EPS:
        return NeuGenMap(ImageF(np.zeros((img.height, img.width))), stats.z, True)
    return NeuGenMap(ImageF(stats.std.data / stats.z), stats.z, False)


def fuse(img: ImageF, gmap: ImageF, w: float = 0.5) -> ImageF:
    """Add ``w * gmap`` to every channel of ``img`` and clamp to [0, 1]."""
    if gmap.channels != 1:
        raise InvalidChannelCount(f"contrast map must have 1 channel, got {gmap.channels}")
    if not img.same_size(gmap):
        raise DimensionMismatch(f"{img!r} vs map {gmap!r}")
    if not w >= 0:
        raise ValueError(f"fusion weight must be >= 0, got {w}")
    return ImageF(np.clip(img.data + w * gmap.data, 0.0, 1.0))


def neugen_enhance(img: ImageF, cfg: NeuGenConfig | None = None) -> ImageF:
    cfg = cfg or NeuGenConfig()
    return fuse(img, neugen_map(img, cfg).image, cfg.fusion_weight)
