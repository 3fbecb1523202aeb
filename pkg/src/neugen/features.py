"""Deterministic SIFT-style keypoints, descriptors and ratio-test matching.

This is a compact difference-of-Gaussians pipeline following Lowe's
conventions (sigma 1.6, 3 scales per octave, contrast 0.03 on [0, 1]
images, edge ratio 10, 4x4x8 descriptors clipped at 0.2). It is meant as
a consistent match counter, not a bit-compatible SIFT.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ImageTooSmall
from .imagecore import ImageF, to_grayscale

__all__ = [
    "Keypoint",
    "MatchReport",
    "detect_keypoints",
    "compute_descriptors",
    "detect_and_describe",
    "match_descriptors",
    "count_matches",
]

SIGMA = 1.6
INIT_SIGMA = 0.5
MIN_SIZE = 16
IMG_BORDER = 5
MAX_INTERP_STEPS = 5

ORI_HIST_BINS = 36
ORI_SIG_FCTR = 1.5
ORI_RADIUS = 3 * ORI_SIG_FCTR

DESCR_WIDTH = 4
DESCR_HIST_BINS = 8
DESCR_SCL_FCTR = 3.0
DESCR_MAG_THR = 0.2
DESCR_LEN = DESCR_WIDTH * DESCR_WIDTH * DESCR_HIST_BINS


@dataclass(frozen=True)
class Keypoint:
    """Keypoint in input-image pixel coordinates.

    ``scale`` is the blur sigma in input pixels; ``octave`` and ``layer``
    locate the Gaussian level the keypoint was found on.
    """

    x: float
    y: float
    scale: float
    orientation: float
    response: float
    octave: int = 0
    layer: int = 1


@dataclass(frozen=True)
class MatchReport:
    count_a_keypoints: int
    count_b_keypoints: int
    matches: int
    ratio_threshold: float
    pairs: tuple[tuple[int, int], ...] = ()


class _Pyramid:
    def __init__(self, gray: np.ndarray, octaves: int, scales: int):
        self.scales = scales
        n_levels = scales + 3
        k = 2.0 ** (1.0 / scales)
        # incremental blur between consecutive levels
        steps = [0.0]
        for i in range(1, n_levels):
            prev = SIGMA * k ** (i - 1)
            steps.append(math.sqrt((prev * k) ** 2 - prev**2))

        base = ndimage.gaussian_filter(gray, math.sqrt(SIGMA**2 - INIT_SIGMA**2), mode="reflect")
        self.gauss: list[list[np.ndarray]] = []
        self.dog: list[np.ndarray] = []
        for _ in range(octaves):
            if min(base.shape) < 2 * IMG_BORDER + 3:
                break
            levels = [base]
            for sig in steps[1:]:
                levels.append(ndimage.gaussian_filter(levels[-1], sig, mode="reflect"))
            self.gauss.append(levels)
            self.dog.append(np.diff(np.stack(levels), axis=0))
            base = levels[scales][::2, ::2]

    def level_sigma(self, layer: float) -> float:
        """Blur sigma of a (fractional) layer in octave-local pixels."""
        return SIGMA * 2.0 ** (layer / self.scales)


def _as_gray(img: ImageF) -> np.ndarray:
    gray = to_grayscale(img).plane(0)
    if min(gray.shape) < MIN_SIZE:
        raise ImageTooSmall(f"{img!r} is smaller than {MIN_SIZE}x{MIN_SIZE}")
    return np.asarray(gray, dtype=np.float64)


def _refine(dog: np.ndarray, s: int, r: int, c: int, scales: int,
            contrast_threshold: float, edge_threshold: float):
    """Quadratic fit around a DoG extremum; returns the refined state or None."""
    n_layers, h, w = dog.shape
    for _ in range(MAX_INTERP_STEPS):
        cube = dog[s - 1:s + 2, r - 1:r + 2, c - 1:c + 2]
        grad = 0.5 * np.array([
            cube[1, 1, 2] - cube[1, 1, 0],
            cube[1, 2, 1] - cube[1, 0, 1],
            cube[2, 1, 1] - cube[0, 1, 1],
        ])
        v2 = 2 * cube[1, 1, 1]
        dxx = cube[1, 1, 2] + cube[1, 1, 0] - v2
        dyy = cube[1, 2, 1] + cube[1, 0, 1] - v2
        dss = cube[2, 1, 1] + cube[0, 1, 1] - v2
        dxy = 0.25 * (cube[1, 2, 2] - cube[1, 2, 0] - cube[1, 0, 2] + cube[1, 0, 0])
        dxs = 0.25 * (cube[2, 1, 2] - cube[2, 1, 0] - cube[0, 1, 2] + cube[0, 1, 0])
        dys = 0.25 * (cube[2, 2, 1] - cube[2, 0, 1] - cube[0, 2, 1] + cube[0, 0, 1])
        hess = np.array([[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]])
        try:
            offset = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            return None
        if np.all(np.abs(offset) < 0.5):
            break
        c += int(round(offset[0]))
        r += int(round(offset[1]))
        s += int(round(offset[2]))
        if (s < 1 or s > scales or r < IMG_BORDER or r >= h - IMG_BORDER
                or c < IMG_BORDER or c >= w - IMG_BORDER):
            return None
    else:
        return None

    contrast = cube[1, 1, 1] + 0.5 * float(grad @ offset)
    if abs(contrast) < contrast_threshold:
        return None
    tr = dxx + dyy
    det = dxx * dyy - dxy * dxy
    if det <= 0 or tr * tr * edge_threshold >= (edge_threshold + 1) ** 2 * det:
        return None
    return s, r, c, offset, abs(contrast)


def _dominant_orientation(img: np.ndarray, r: int, c: int, sigma: float) -> float:
    radius = int(round(ORI_RADIUS * sigma))
    h, w = img.shape
    r0, r1 = max(r - radius, 1), min(r + radius, h - 2)
    c0, c1 = max(c - radius, 1), min(c + radius, w - 2)
    yy, xx = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    gx = img[yy, xx + 1] - img[yy, xx - 1]
    gy = img[yy + 1, xx] - img[yy - 1, xx]
    weight = np.exp(-((yy - r) ** 2 + (xx - c) ** 2) / (2 * (ORI_SIG_FCTR * sigma) ** 2))
    mag = np.hypot(gx, gy) * weight
    ang = np.mod(np.arctan2(gy, gx), 2 * np.pi)
    bins = np.floor(ang * ORI_HIST_BINS / (2 * np.pi)).astype(int) % ORI_HIST_BINS
    hist = np.bincount(bins.ravel(), weights=mag.ravel(), minlength=ORI_HIST_BINS)
    hist = (6 * hist + 4 * (np.roll(hist, 1) + np.roll(hist, -1))
            + np.roll(hist, 2) + np.roll(hist, -2)) / 16.0

    peak = int(np.argmax(hist))
    left, right = hist[peak - 1], hist[(peak + 1) % ORI_HIST_BINS]
    denom = left - 2 * hist[peak] + right
    shift = 0.5 * (left - right) / denom if denom != 0 else 0.0
    return float(np.mod((peak + shift) * 2 * np.pi / ORI_HIST_BINS, 2 * np.pi))


def _detect(pyr: _Pyramid, contrast_threshold: float, edge_threshold: float,
            width: int, height: int) -> list[Keypoint]:
    scales = pyr.scales
    prethresh = 0.5 * contrast_threshold
    found = []
    for o, dog in enumerate(pyr.dog):
        n_layers, h, w = dog.shape
        is_max = dog == ndimage.maximum_filter(dog, size=3, mode="nearest")
        is_min = dog == ndimage.minimum_filter(dog, size=3, mode="nearest")
        cand = (is_max | is_min) & (np.abs(dog) > prethresh)
        cand[[0, -1]] = False
        cand[:, :IMG_BORDER] = cand[:, h - IMG_BORDER:] = False
        cand[:, :, :IMG_BORDER] = cand[:, :, w - IMG_BORDER:] = False

        seen = set()
        for s, r, c in zip(*np.nonzero(cand)):
            refined = _refine(dog, int(s), int(r), int(c), scales,
                              contrast_threshold, edge_threshold)
            if refined is None:
                continue
            s2, r2, c2, off, resp = refined
            if (s2, r2, c2) in seen:
                continue
            seen.add((s2, r2, c2))
            step = 2.0**o
            x = (c2 + off[0]) * step
            y = (r2 + off[1]) * step
            if not (0 <= x < width and 0 <= y < height):
                continue
            sigma = pyr.level_sigma(s2 + off[2])
            theta = _dominant_orientation(pyr.gauss[o][s2], r2, c2, sigma)
            found.append(Keypoint(float(x), float(y), float(sigma * step), theta,
                                  float(resp), o, s2))
    found.sort(key=lambda k: (-k.response, k.y, k.x))
    return found


def detect_keypoints(gray: ImageF, octaves: int = 3, scales_per_octave: int = 3,
                     contrast_threshold: float = 0.03,
                     edge_threshold: float = 10.0) -> list[Keypoint]:
    """DoG extrema refined to subpixel and filtered by contrast and edge ratio.

    Ordered by response (descending), then y, then x. RGB input is
    converted to luma first.
    """
    arr = _as_gray(gray)
    pyr = _Pyramid(arr, octaves, scales_per_octave)
    return _detect(pyr, contrast_threshold, edge_threshold, arr.shape[1], arr.shape[0])


def _describe(pyr: _Pyramid, kp: Keypoint) -> np.ndarray:
    d, n = DESCR_WIDTH, DESCR_HIST_BINS
    step = 2.0**kp.octave
    img = pyr.gauss[kp.octave][kp.layer]
    h, w = img.shape
    px, py = kp.x / step, kp.y / step
    scl = kp.scale / step
    hist_width = DESCR_SCL_FCTR * scl
    radius = int(round(hist_width * math.sqrt(2) * (d + 1) * 0.5))
    radius = min(radius, int(math.hypot(h, w)))
    cos_t, sin_t = math.cos(kp.orientation), math.sin(kp.orientation)
    cr, cc = int(round(py)), int(round(px))

    dy, dx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    yy, xx = cr + dy, cc + dx
    # offsets relative to the subpixel centre, rotated into the keypoint frame
    ox, oy = xx - px, yy - py
    u = (cos_t * ox + sin_t * oy) / hist_width
    v = (-sin_t * ox + cos_t * oy) / hist_width
    rbin = v + d / 2 - 0.5
    cbin = u + d / 2 - 0.5
    keep = ((rbin > -1) & (rbin < d) & (cbin > -1) & (cbin < d)
            & (yy > 0) & (yy < h - 1) & (xx > 0) & (xx < w - 1))
    yy, xx, u, v, rbin, cbin = yy[keep], xx[keep], u[keep], v[keep], rbin[keep], cbin[keep]

    gx = img[yy, xx + 1] - img[yy, xx - 1]
    gy = img[yy + 1, xx] - img[yy - 1, xx]
    weight = np.exp(-(u * u + v * v) / (2 * (0.5 * d) ** 2))
    mag = np.hypot(gx, gy) * weight
    obin = np.mod(np.arctan2(gy, gx) - kp.orientation, 2 * np.pi) * n / (2 * np.pi)

    r0 = np.floor(rbin).astype(int)
    c0 = np.floor(cbin).astype(int)
    o0 = np.floor(obin).astype(int)
    fr, fc, fo = rbin - r0, cbin - c0, obin - o0
    hist = np.zeros((d + 2, d + 2, n))
    for ir, wr in ((0, 1 - fr), (1, fr)):
        for ic, wc in ((0, 1 - fc), (1, fc)):
            for io, wo in ((0, 1 - fo), (1, fo)):
                np.add.at(hist, (r0 + 1 + ir, c0 + 1 + ic, (o0 + io) % n), mag * wr * wc * wo)

    vec = hist[1:d + 1, 1:d + 1].ravel()
    norm = np.linalg.norm(vec)
    if norm == 0:
        return vec
    vec = np.minimum(vec / norm, DESCR_MAG_THR)
    return vec / np.linalg.norm(vec)


def compute_descriptors(gray: ImageF, keypoints: list[Keypoint],
                        scales_per_octave: int = 3) -> np.ndarray:
    """One 128-long descriptor per keypoint, as an ``(n, 128)`` array."""
    if not keypoints:
        return np.zeros((0, DESCR_LEN))
    arr = _as_gray(gray)
    octaves = max(k.octave for k in keypoints) + 1
    pyr = _Pyramid(arr, octaves, scales_per_octave)
    return np.stack([_describe(pyr, k) for k in keypoints])


def detect_and_describe(gray: ImageF, octaves: int = 3, scales_per_octave: int = 3,
                        contrast_threshold: float = 0.03, edge_threshold: float = 10.0):
    """Detection and description sharing a single pyramid."""
    arr = _as_gray(gray)
    pyr = _Pyramid(arr, octaves, scales_per_octave)
    kps = _detect(pyr, contrast_threshold, edge_threshold, arr.shape[1], arr.shape[0])
    if not kps:
        return kps, np.zeros((0, DESCR_LEN))
    return kps, np.stack([_describe(pyr, k) for k in kps])


def match_descriptors(a: np.ndarray, b: np.ndarray, ratio: float = 0.8) -> MatchReport:
    """Lowe ratio test followed by greedy one-to-one assignment.

    Each row of ``a`` proposes its nearest neighbour in ``b`` if it beats
    ``ratio`` times the second-nearest distance. Proposals are accepted in
    order of increasing distance, each row of ``b`` used at most once.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"ratio must be in (0, 1), got {ratio}")
    a = np.asarray(a, dtype=np.float64).reshape(-1, DESCR_LEN)
    b = np.asarray(b, dtype=np.float64).reshape(-1, DESCR_LEN)
    if len(a) == 0 or len(b) == 0:
        return MatchReport(len(a), len(b), 0, ratio)

    d2 = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2 * (a @ b.T)
    dist = np.sqrt(np.maximum(d2, 0.0))
    if len(b) == 1:
        nearest = np.zeros(len(a), dtype=int)
        d1 = dist[:, 0]
        second = np.full(len(a), np.inf)
    else:
        order = np.argsort(dist, axis=1, kind="stable")[:, :2]
        nearest = order[:, 0]
        rows = np.arange(len(a))
        d1 = dist[rows, nearest]
        second = dist[rows, order[:, 1]]
    passing = np.nonzero(d1 < ratio * second)[0]
    passing = passing[np.lexsort((passing, d1[passing]))]

    taken = set()
    pairs = []
    for i in passing:
        j = int(nearest[i])
        if j not in taken:
            taken.add(j)
            pairs.append((int(i), j))
    return MatchReport(len(a), len(b), len(pairs), ratio, tuple(pairs))


def count_matches(img_a: ImageF, img_b: ImageF, ratio: float = 0.8, **detect_kw) -> MatchReport:
    """Detect, describe and match two images in one call."""
    _, da = detect_and_describe(img_a, **detect_kw)
    _, db = detect_and_describe(img_b, **detect_kw)
    return match_descriptors(da, db, ratio)
