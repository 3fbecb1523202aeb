"""Emission-absorption volume rendering on synthetic voxel fields.

A ray sample ``i`` with density ``sigma_i`` and step ``delta_i`` has
opacity ``alpha_i = 1 - exp(-sigma_i * delta_i)``; light reaching it is
``T_i = exp(-sum_{j<i} sigma_j * delta_j)`` and the pixel colour is
``sum_i T_i * alpha_i * c_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRay, InvalidCamera
from .imagecore import ImageF

__all__ = [
    "RaySamples",
    "VoxelField",
    "Camera",
    "transmittance",
    "sample_weights",
    "composite_ray",
    "composite_batch",
    "render_field",
    "uniform_samples",
    "homogeneous_slab",
    "gaussian_cloud",
]


@dataclass(frozen=True)
class RaySamples:
    """Ordered samples along one ray.

    ``t`` and ``delta`` have shape ``(n,)``, ``sigma`` ``(n,)`` and
    ``color`` ``(n, 3)``. The ray spans ``[t[0], t[-1] + delta[-1]]``.
    """

    t: np.ndarray
    delta: np.ndarray
    sigma: np.ndarray
    color: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).ravel()
        delta = np.asarray(self.delta, dtype=np.float64).ravel()
        sigma = np.asarray(self.sigma, dtype=np.float64).ravel()
        color = np.asarray(self.color, dtype=np.float64).reshape(-1, 3)
        if len(t) == 0:
            raise EmptyRay("ray has no samples")
        if not (len(delta) == len(sigma) == len(color) == len(t)):
            raise ValueError("t, delta, sigma and color must have the same length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("t must be strictly increasing")
        if np.any(delta <= 0):
            raise ValueError("delta must be positive")
        if np.any(sigma < 0):
            raise ValueError("sigma must be non-negative")
        for name, arr in (("t", t), ("delta", delta), ("sigma", sigma), ("color", color)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return len(self.t)

    @property
    def near(self) -> float:
        return float(self.t[0])

    @property
    def far(self) -> float:
        return float(self.t[-1] + self.delta[-1])


def _optical_depth(sigma, delta):
    tau = sigma * delta
    acc = np.cumsum(tau, axis=-1)
    return tau, np.concatenate([np.zeros_like(acc[..., :1]), acc[..., :-1]], axis=-1)


def transmittance(samples: RaySamples) -> np.ndarray:
    """``T_i`` for every sample; ``T_0 == 1`` and the sequence never increases."""
    _, before = _optical_depth(samples.sigma, samples.delta)
    return np.exp(-before)


def sample_weights(samples: RaySamples) -> np.ndarray:
    """Per-sample compositing weights ``T_i * alpha_i``; they sum to at most 1."""
    tau, before = _optical_depth(samples.sigma, samples.delta)
    return np.exp(-before) * -np.expm1(-tau)


def composite_ray(samples: RaySamples) -> np.ndarray:
    return sample_weights(samples) @ samples.color


def composite_batch(sigma: np.ndarray, delta: np.ndarray, color: np.ndarray) -> np.ndarray:
    """Composite many rays at once: ``sigma``/``delta`` ``(..., n)``, ``color`` ``(..., n, 3)``."""
    tau, before = _optical_depth(sigma, delta)
    w = np.exp(-before) * -np.expm1(-tau)
    return np.einsum("...n,...nc->...c", w, color)


def uniform_samples(near: float, far: float, n: int, sigma, color) -> RaySamples:
    """``n`` equal steps over ``[near, far]``; ``sigma``/``color`` may be scalars/triples."""
    delta = (far - near) / n
    t = near + delta * np.arange(n)
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), (n,))
    color = np.broadcast_to(np.asarray(color, dtype=np.float64), (n, 3))
    return RaySamples(t, np.full(n, delta), sigma, color)


@dataclass(frozen=True)
class VoxelField:
    """Density and RGB colour sampled at voxel centres of an axis-aligned box.

    ``sigma_grid`` has shape ``(nx, ny, nz)``, ``color_grid``
    ``(nx, ny, nz, 3)``. Lookups are trilinear, clamped at the outer
    voxel centres.
    """

    sigma_grid: np.ndarray
    color_grid: np.ndarray
    bounds_min: tuple[float, float, float] = (-1.0, -1.0, -1.0)
    bounds_max: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        sigma = np.asarray(self.sigma_grid, dtype=np.float64)
        color = np.asarray(self.color_grid, dtype=np.float64)
        if sigma.ndim != 3 or color.shape != sigma.shape + (3,):
            raise ValueError("sigma_grid must be (nx, ny, nz), color_grid (nx, ny, nz, 3)")
        if np.any(sigma < 0):
            raise ValueError("densities must be non-negative")
        lo = np.asarray(self.bounds_min, dtype=np.float64)
        hi = np.asarray(self.bounds_max, dtype=np.float64)
        if np.any(hi <= lo):
            raise ValueError("bounds_max must exceed bounds_min on every axis")
        object.__setattr__(self, "sigma_grid", sigma)
        object.__setattr__(self, "color_grid", color)
        object.__setattr__(self, "bounds_min", tuple(lo))
        object.__setattr__(self, "bounds_max", tuple(hi))

    @property
    def resolution(self) -> tuple[int, int, int]:
        return self.sigma_grid.shape

    def sample(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Trilinear density and colour at ``points`` of shape ``(..., 3)``."""
        lo = np.asarray(self.bounds_min)
        hi = np.asarray(self.bounds_max)
        res = np.asarray(self.resolution)
        # continuous index: voxel centre k sits at lo + (k + 0.5) * size
        g = (points - lo) / (hi - lo) * res - 0.5
        g = np.clip(g, 0.0, res - 1)
        i0 = np.minimum(np.floor(g).astype(np.intp), res - 2).clip(min=0)
        f = g - i0
        i1 = np.minimum(i0 + 1, res - 1)
        sig = np.zeros(points.shape[:-1])
        col = np.zeros(points.shape[:-1] + (3,))
        for cx in (0, 1):
            ix = i1[..., 0] if cx else i0[..., 0]
            wx = f[..., 0] if cx else 1 - f[..., 0]
            for cy in (0, 1):
                iy = i1[..., 1] if cy else i0[..., 1]
                wy = f[..., 1] if cy else 1 - f[..., 1]
                for cz in (0, 1):
                    iz = i1[..., 2] if cz else i0[..., 2]
                    wz = f[..., 2] if cz else 1 - f[..., 2]
                    w = wx * wy * wz
                    sig += w * self.sigma_grid[ix, iy, iz]
                    col += w[..., None] * self.color_grid[ix, iy, iz]
        return sig, col


@dataclass(frozen=True)
class Camera:
    """Pinhole camera looking from ``position`` towards ``target``."""

    position: tuple[float, float, float] = (0.0, 0.0, 3.0)
    target: tuple[float, float, float] = (0.0, 0.0, 0.0)
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)
    fov_deg: float = 30.0
    width: int = 64
    height: int = 64

    def rays(self) -> tuple[np.ndarray, np.ndarray]:
        """Ray origin ``(3,)`` and unit directions ``(height, width, 3)``."""
        if self.width < 1 or self.height < 1:
            raise InvalidCamera("image size must be at least 1x1")
        if not 0 < self.fov_deg < 180:
            raise InvalidCamera(f"fov must be in (0, 180), got {self.fov_deg}")
        origin = np.asarray(self.position, dtype=np.float64)
        forward = np.asarray(self.target, dtype=np.float64) - origin
        if np.linalg.norm(forward) == 0:
            raise InvalidCamera("position and target coincide")
        forward /= np.linalg.norm(forward)
        right = np.cross(forward, np.asarray(self.up, dtype=np.float64))
        if np.linalg.norm(right) < 1e-12:
            raise InvalidCamera("up vector is parallel to the view direction")
        right /= np.linalg.norm(right)
        true_up = np.cross(right, forward)

        focal = 0.5 * self.width / math.tan(math.radians(self.fov_deg) / 2)
        xs = np.arange(self.width) + 0.5 - self.width / 2
        ys = self.height / 2 - (np.arange(self.height) + 0.5)
        px, py = np.meshgrid(xs, ys)
        dirs = (px[..., None] * right + py[..., None] * true_up + focal * forward)
        dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
        return origin, dirs


def _box_hits(origin, dirs, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t0 = (lo - origin) * inv
        t1 = (hi - origin) * inv
    # axis-parallel rays: inside the slab means unbounded, outside means miss
    par = dirs == 0
    inside = (origin >= lo) & (origin <= hi)
    t0 = np.where(par, np.where(inside, -np.inf, np.inf), t0)
    t1 = np.where(par, np.where(inside, np.inf, -np.inf), t1)
    t_enter = np.max(np.minimum(t0, t1), axis=-1)
    t_exit = np.min(np.maximum(t0, t1), axis=-1)
    t_enter = np.maximum(t_enter, 0.0)
    return t_enter, t_exit, t_exit > t_enter


def render_field(field: VoxelField, camera: Camera, n_samples: int = 128, *,
                 jitter_seed: int | None = None, chunk_rows: int = 8) -> ImageF:
    """Render an RGB image; rays that miss the box stay black.

    Samples sit at stratum midpoints between box entry and exit. With
    ``jitter_seed`` each sample is instead drawn uniformly inside its
    stratum from a seeded generator.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    origin, dirs = camera.rays()
    lo = np.asarray(field.bounds_min)
    hi = np.asarray(field.bounds_max)
    t_enter, t_exit, hit = _box_hits(origin, dirs, lo, hi)
    rng = np.random.default_rng(jitter_seed) if jitter_seed is not None else None

    out = np.zeros((camera.height, camera.width, 3))
    for r0 in range(0, camera.height, chunk_rows):
        rows = slice(r0, r0 + chunk_rows)
        mask = hit[rows]
        if not mask.any():
            continue
        te, tx, d = t_enter[rows][mask], t_exit[rows][mask], dirs[rows][mask]
        delta = (tx - te) / n_samples
        if rng is None:
            u = np.full(n_samples, 0.5)
        else:
            u = rng.random((len(te), n_samples))
        t = te[:, None] + (np.arange(n_samples) + u) * delta[:, None]
        pts = origin + t[..., None] * d[:, None, :]
        sig, col = field.sample(pts)
        steps = np.broadcast_to(delta[:, None], sig.shape)
        block = out[rows]
        block[mask] = composite_batch(sig, steps, col)
    return ImageF(np.clip(out, 0.0, 1.0))


def homogeneous_slab(sigma: float, color=(1.0, 0.0, 0.0), resolution: int = 4) -> VoxelField:
    """Unit-box field with constant density and colour everywhere."""
    n = resolution
    return VoxelField(np.full((n, n, n), float(sigma)),
                      np.broadcast_to(np.asarray(color, dtype=np.float64), (n, n, n, 3)).copy())


def gaussian_cloud(resolution: int = 32, peak: float = 4.0, width: float = 0.4) -> VoxelField:
    """Smooth Gaussian density blob with a position-dependent colour ramp."""
    n = resolution
    c = (np.arange(n) + 0.5) / n * 2 - 1
    x, y, z = np.meshgrid(c, c, c, indexing="ij")
    sigma = peak * np.exp(-(x * x + y * y + z * z) / (2 * width * width))
    color = np.stack([(x + 1) / 2, (y + 1) / 2, np.full_like(x, 0.5)], axis=-1)
    return VoxelField(sigma, color)
