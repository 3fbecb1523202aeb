"""Closed-form checks of the volume renderer, used by ``neugen render-test``."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .imagecore import save_image
from .volren import (Camera, RaySamples, composite_ray, gaussian_cloud, homogeneous_slab,
                     render_field, transmittance, uniform_samples)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def random_rays(rng: np.random.Generator, n_rays: int = 1000, max_samples: int = 64):
    for _ in range(n_rays):
        n = int(rng.integers(1, max_samples + 1))
        t = np.cumsum(rng.uniform(0.01, 0.2, n))
        delta = rng.uniform(0.01, 0.2, n)
        sigma = rng.exponential(2.0, n) * (rng.random(n) < 0.7)
        yield RaySamples(t, delta, sigma, rng.random((n, 3)))


def check_homogeneous(samples: int, sigma0=1.5, length=2.0, color=(0.2, 0.5, 0.9)) -> Check:
    got = composite_ray(uniform_samples(0.0, length, samples, sigma0, color))
    want = np.asarray(color) * (1 - math.exp(-sigma0 * length))
    rel = float(np.max(np.abs(got - want) / want))
    return Check("homogeneous closed form", rel < 1e-3, f"max relative error {rel:.3e} at {samples} samples")


def check_monotone(n_rays=1000, seed=0) -> Check:
    rng = np.random.default_rng(seed)
    bad = 0
    for ray in random_rays(rng, n_rays):
        T = transmittance(ray)
        if T[0] != 1.0 or np.any(np.diff(T) > 0) or np.any(T <= 0):
            bad += 1
    return Check("transmittance monotone", bad == 0, f"{bad} of {n_rays} rays violate T0=1, T nonincreasing, T>0")


def check_opaque_first() -> Check:
    ray = RaySamples([0.0, 1.0, 2.0], [1.0, 1.0, 1.0], [20.0, 5.0, 5.0],
                     [[1, 0, 0], [0, 1, 0], [0, 0, 1]])
    want = np.array([1.0, 0.0, 0.0]) * (1 - math.exp(-20))
    err = float(np.max(np.abs(composite_ray(ray) - want)))
    return Check("near-opaque first sample", err < 1e-6, f"max abs error {err:.3e}")


def _camera(size: int) -> Camera:
    return Camera(position=(0.0, 0.0, 3.0), fov_deg=20.0, width=size, height=size)


def run_render_test(out_dir, samples: int = 1024, size: int = 128) -> list[Check]:
    """Run every renderer check and write images, a figure and a summary."""
    from .plotting import plot_convergence

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checks = [check_homogeneous(samples), check_monotone(), check_opaque_first()]
    cam = _camera(size)

    empty = render_field(homogeneous_slab(0.0), cam, samples)
    save_image(empty, out / "empty.png")
    checks.append(Check("empty field is black", float(empty.data.max()) == 0.0,
                        f"max sample {float(empty.data.max()):.3e}"))

    slab = render_field(homogeneous_slab(20.0, (1.0, 0.0, 0.0)), cam, samples)
    save_image(slab, out / "slab_red.png")
    err = float(np.max(np.abs(slab.data - np.array([1.0, 0.0, 0.0]))))
    checks.append(Check("opaque slab renders red", err < 1e-3, f"max abs error {err:.3e}"))

    cloud = render_field(gaussian_cloud(), cam, samples)
    save_image(cloud, out / "cloud.png")

    small = _camera(32)
    prev = render_field(homogeneous_slab(1.0), small, samples // 2).data
    cur = render_field(homogeneous_slab(1.0), small, samples).data
    slab_delta = float(np.max(np.abs(cur - prev)))
    checks.append(Check("slab doubling stable", slab_delta < 1e-4 or samples < 512,
                        f"max change {slab_delta:.3e} from {samples // 2} to {samples} samples"))

    # start finer than the 32^3 voxel spacing so every doubling is in the asymptotic regime
    counts = [64 * 2**k for k in range(5) if 64 * 2**k <= max(samples, 128)]
    renders = [render_field(gaussian_cloud(), small, n).data for n in counts]
    deltas = [float(np.max(np.abs(b - a))) for a, b in zip(renders, renders[1:])]
    monotone = all(d2 < d1 for d1, d2 in zip(deltas, deltas[1:]))
    checks.append(Check("cloud converges under doubling", monotone,
                        "deltas " + ", ".join(f"{d:.2e}" for d in deltas)))
    if deltas:
        plot_convergence(counts[1:], deltas, out / "convergence.png")

    lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in checks]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    (out / "summary.json").write_text(
        json.dumps([asdict(c) for c in checks], indent=2, sort_keys=True) + "\n")
    return checks
