import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neugen.errors import EmptyRay, InvalidCamera
from neugen.rendertest import random_rays
from neugen.volren import (Camera, RaySamples, VoxelField, composite_batch, composite_ray,
                           gaussian_cloud, homogeneous_slab, render_field, sample_weights,
                           transmittance, uniform_samples)

CAM = Camera(position=(0.0, 0.0, 3.0), fov_deg=20.0, width=24, height=24)


def test_transmittance_zero_density():
    ray = uniform_samples(0.0, 1.0, 10, 0.0, (1, 1, 1))
    assert np.all(transmittance(ray) == 1.0)
    np.testing.assert_array_equal(composite_ray(ray), [0, 0, 0])


def test_transmittance_single_term():
    ray = RaySamples([0.0, 0.5], [0.5, 0.5], [2.0, 7.0], [[1, 0, 0], [0, 1, 0]])
    T = transmittance(ray)
    assert T[0] == 1.0
    assert T[1] == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_transmittance_monotone_random_rays():
    for ray in random_rays(np.random.default_rng(11), 1000):
        T = transmittance(ray)
        assert T[0] == 1.0
        assert np.all(np.diff(T) <= 0)
        assert np.all(T > 0)


@pytest.mark.parametrize("sigma0, length", [(1.5, 2.0), (0.1, 1.0), (5.0, 0.7)])
def test_homogeneous_closed_form(sigma0, length):
    color = np.array([0.2, 0.5, 0.9])
    got = composite_ray(uniform_samples(0.0, length, 1024, sigma0, color))
    want = color * (1 - math.exp(-sigma0 * length))
    np.testing.assert_allclose(got, want, rtol=1e-3)


def test_near_opaque_first_sample():
    ray = RaySamples([0.0, 1.0], [1.0, 1.0], [20.0, 3.0], [[1, 0, 0], [0, 0, 1]])
    np.testing.assert_allclose(composite_ray(ray), [1 - math.exp(-20), 0, 0], atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_energy_bound(seed):
    ray = next(random_rays(np.random.default_rng(seed), 1))
    w = sample_weights(ray)
    assert np.all(w >= 0) and w.sum() <= 1 + 1e-12
    c = composite_ray(ray)
    assert np.all(c <= ray.color.max(axis=0) + 1e-12)
    assert np.all((0 <= c) & (c <= 1))


def test_batch_matches_single_rays():
    rays = [uniform_samples(0.0, 2.0, 16, s, (0.3, 0.6, 0.9)) for s in (0.0, 0.5, 3.0)]
    batch = composite_batch(np.stack([r.sigma for r in rays]), np.stack([r.delta for r in rays]),
                            np.stack([r.color for r in rays]))
    for row, ray in zip(batch, rays):
        np.testing.assert_allclose(row, composite_ray(ray), atol=1e-14)


def test_ray_validation():
    with pytest.raises(EmptyRay):
        RaySamples([], [], [], np.zeros((0, 3)))
    with pytest.raises(ValueError):
        RaySamples([0.0, 0.0], [1.0, 1.0], [1.0, 1.0], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        RaySamples([0.0], [1.0], [-1.0], np.zeros((1, 3)))


def test_voxel_field_trilinear():
    sigma = np.zeros((2, 2, 2))
    sigma[1] = 2.0
    field = VoxelField(sigma, np.zeros((2, 2, 2, 3)))
    # voxel centres sit at x = -0.5 and +0.5
    s, _ = field.sample(np.array([[-0.5, 0, 0], [0.0, 0, 0], [0.5, 0, 0], [0.9, 0.3, -0.8]]))
    np.testing.assert_allclose(s, [0.0, 1.0, 2.0, 2.0])


def test_render_empty_is_black():
    img = render_field(homogeneous_slab(0.0), CAM, 64)
    assert img.data.max() == 0.0


def test_render_opaque_slab_is_red():
    img = render_field(homogeneous_slab(20.0, (1.0, 0.0, 0.0)), CAM, 512)
    assert np.max(np.abs(img.data - [1.0, 0.0, 0.0])) < 1e-3


def test_rays_missing_box_are_black():
    cam = Camera(position=(0.0, 0.0, 3.0), target=(5.0, 0.0, 3.0), width=8, height=8)
    assert render_field(homogeneous_slab(5.0), cam, 32).data.max() == 0.0


@pytest.mark.parametrize("n", [512, 1024])
def test_slab_doubling_stable(n):
    small = Camera(position=(0.0, 0.0, 3.0), fov_deg=20.0, width=16, height=16)
    a = render_field(homogeneous_slab(1.0), small, n).data
    b = render_field(homogeneous_slab(1.0), small, 2 * n).data
    assert np.max(np.abs(a - b)) < 1e-4


def test_homogeneous_doubling_is_exact():
    # midpoint strata integrate a constant medium exactly, so doubling only moves round-off
    small = Camera(position=(0.0, 0.0, 3.0), fov_deg=20.0, width=8, height=8)
    renders = [render_field(homogeneous_slab(1.5, (0.3, 0.6, 0.9)), small, 16 * 2**k).data
               for k in range(5)]
    assert max(np.max(np.abs(b - a)) for a, b in zip(renders, renders[1:])) < 1e-12


def test_cloud_converges_monotonically():
    small = Camera(position=(0.0, 0.0, 3.0), fov_deg=20.0, width=16, height=16)
    renders = [render_field(gaussian_cloud(), small, 64 * 2**k).data for k in range(5)]
    deltas = [np.max(np.abs(b - a)) for a, b in zip(renders, renders[1:])]
    assert all(d2 < d1 for d1, d2 in zip(deltas, deltas[1:]))


def test_render_deterministic_and_chunk_independent():
    a = render_field(gaussian_cloud(16), CAM, 64, chunk_rows=3)
    b = render_field(gaussian_cloud(16), CAM, 64, chunk_rows=24)
    assert a.data.tobytes() == b.data.tobytes()
    j1 = render_field(gaussian_cloud(16), CAM, 64, jitter_seed=5)
    j2 = render_field(gaussian_cloud(16), CAM, 64, jitter_seed=5)
    assert j1.data.tobytes() == j2.data.tobytes()


@pytest.mark.parametrize("kwargs", [
    {"width": 0}, {"fov_deg": 0.0}, {"fov_deg": 180.0},
    {"position": (0, 0, 0), "target": (0, 0, 0)}, {"up": (0, 0, 1)},
])
def test_invalid_camera(kwargs):
    with pytest.raises(InvalidCamera):
        render_field(homogeneous_slab(1.0), Camera(**kwargs), 8)
