"""Procedural test images and affine-intensity corpora."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy import ndimage

from .imagecore import ImageF, save_image

__all__ = [
    "textured_image",
    "checkerboard",
    "gaussian_blob",
    "affine",
    "affine_corpus",
    "write_corpus",
]


def textured_image(rng: np.random.Generator, size: int = 96, channels: int = 3) -> ImageF:
    """Multi-scale noise plus a few hard-edged discs, stretched to [0, 1]."""
    h = w = size
    base = np.zeros((h, w))
    for sigma in (1.0, 2.0, 4.0):
        band = ndimage.gaussian_filter(rng.random((h, w)), sigma)
        base += (band - band.mean()) / band.std()
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(4):
        cy, cx = rng.uniform(0.15, 0.85, 2) * size
        rad = rng.uniform(0.05, 0.15) * size
        base += 1.5 * rng.choice([-1, 1]) * ((yy - cy) ** 2 + (xx - cx) ** 2 < rad**2)
    base = (base - base.min()) / (base.max() - base.min())
    if channels == 1:
        return ImageF(base)
    tint = rng.uniform(0.6, 1.0, 3)
    shift = ndimage.gaussian_filter(rng.random((h, w, 3)), (4, 4, 0)) * 0.2
    rgb = base[:, :, None] * tint + shift
    rgb = (rgb - rgb.min()) / (rgb.max() - rgb.min())
    return ImageF(rgb)


def checkerboard(size: int = 64, square: int = 8, low: float = 0.0, high: float = 1.0) -> ImageF:
    yy, xx = np.mgrid[0:size, 0:size]
    board = ((yy // square + xx // square) % 2).astype(np.float64)
    return ImageF(low + (high - low) * board)


def gaussian_blob(size: int = 64, center=(32.0, 32.0), sigma: float = 4.0) -> ImageF:
    """Bright isotropic blob on black; ``center`` is ``(x, y)``."""
    yy, xx = np.mgrid[0:size, 0:size]
    cx, cy = center
    return ImageF(np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * sigma**2)))


def affine(img: ImageF, a: float, b: float, clamp: bool = False) -> ImageF:
    out = a * img.data + b
    return ImageF(np.clip(out, 0.0, 1.0) if clamp else out)


def affine_corpus(n_scenes: int = 5, n_variants: int = 4, size: int = 96, seed: int = 0,
                  channels: int = 3, gain=(0.4, 0.95), offset=None) -> dict[str, list[ImageF]]:
    """Scenes of one base image followed by affine-intensity copies of it.

    Each variant is ``a * base + b`` with ``a`` drawn from ``gain``. With
    ``offset=None`` the offset is drawn so every sample stays in [0, 1]
    (needs ``gain[1] <= 1``); otherwise ``b`` is drawn from ``offset`` and
    the result is left unclamped.
    """
    rng = np.random.default_rng(seed)
    corpus = {}
    for k in range(n_scenes):
        base = textured_image(rng, size, channels)
        images = [base]
        for _ in range(n_variants):
            a = rng.uniform(*gain)
            b = rng.uniform(0.0, 1.0 - a) if offset is None else rng.uniform(*offset)
            images.append(affine(base, a, b))
        corpus[f"scene{k:02d}"] = images
    return corpus


def write_corpus(root, corpus: dict[str, list[ImageF]], depth: int = 16) -> list[Path]:
    root = Path(root)
    written = []
    for name, images in corpus.items():
        scene_dir = root / name
        scene_dir.mkdir(parents=True, exist_ok=True)
        for i, img in enumerate(images):
            path = scene_dir / f"{i:03d}.png"
            save_image(img, path, depth)
            written.append(path)
    return written
