"""SSIM, PSNR and the first-vs-rest class aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, ImageTooSmall, TooFewImages
from .imagecore import ImageF, check_same_size, to_grayscale

__all__ = ["SsimParams", "PairScore", "gaussian_window", "ssim", "psnr", "psnr_from_mse",
           "pair_score", "class_ssim"]


@dataclass(frozen=True)
class SsimParams:
    window: int = 11
    gaussian_sigma: float = 1.5
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 3 or self.window % 2 == 0:
            raise ValueError(f"window must be an odd integer >= 3, got {self.window}")
        for name in ("gaussian_sigma", "k1", "k2", "dynamic_range"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class PairScore:
    ssim: float
    psnr_db: float


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """Normalised 1-D Gaussian taps; the 2-D window is its outer product."""
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = len(taps)
    x = sliding_window_view(x, n, axis=0) @ taps
    return sliding_window_view(x, n, axis=1) @ taps


def ssim(a: ImageF, b: ImageF, p: SsimParams | None = None) -> float:
    """Mean SSIM over all positions where the window fits inside the image.

    RGB inputs are compared on their luma.
    """
    p = p or SsimParams()
    check_same_size(a, b)
    if min(a.height, a.width) < p.window:
        raise ImageTooSmall(f"{a!r} is smaller than the {p.window}px SSIM window")
    x = to_grayscale(a).plane(0)
    y = to_grayscale(b).plane(0)
    taps = gaussian_window(p.window, p.gaussian_sigma)
    c1 = (p.k1 * p.dynamic_range) ** 2
    c2 = (p.k2 * p.dynamic_range) ** 2

    mu_x = _filter_valid(x, taps)
    mu_y = _filter_valid(y, taps)
    var_x = _filter_valid(x * x, taps) - mu_x * mu_x
    var_y = _filter_valid(y * y, taps) - mu_y * mu_y
    cov = _filter_valid(x * y, taps) - mu_x * mu_y

    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def psnr_from_mse(mse: float, peak: float = 1.0) -> float:
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak) - 10.0 * math.log10(mse)


def psnr(a: ImageF, b: ImageF) -> float:
    """PSNR in dB with peak 1; ``math.inf`` for identical images."""
    check_same_size(a, b)
    diff = a.data - b.data
    return psnr_from_mse(float(np.mean(diff * diff)))


def pair_score(a: ImageF, b: ImageF, p: SsimParams | None = None) -> PairScore:
    return PairScore(ssim=ssim(a, b, p), psnr_db=psnr(a, b))


def class_ssim(images: Sequence[ImageF], p: SsimParams | None = None) -> float:
    """Average SSIM of the first image against each of the others."""
    if len(images) < 2:
        raise TooFewImages(f"need at least 2 images, got {len(images)}")
    first = images[0]
    for other in images[1:]:
        if not first.same_size(other) or first.channels != other.channels:
            raise DimensionMismatch(f"{first!r} vs {other!r}")
    scores = [ssim(first, other, p) for other in images[1:]]
    return float(np.mean(scores))
