import numpy as np
import pytest
from helpers import poisson_post_log_mean

from ctinr.geometry import GridSpec, make_fan_geometry, make_grid_coords
from ctinr.phantom import (
    NoiseConfig,
    PhantomConfig,
    add_poisson_noise,
    default_phantom_config,
    downsample_image,
    generate_phantom,
    simulate_sinogram,
)
from ctinr.projector import Image, Sinogram, forward_project


def small_phantom_config(seed=0, **overrides):
    return default_phantom_config(seed=seed, n_hi=64, fov=100.0, **overrides)


def test_phantom_deterministic_in_seed():
    a = generate_phantom(small_phantom_config(seed=42))
    b = generate_phantom(small_phantom_config(seed=42))
    np.testing.assert_array_equal(a.data, b.data)
    c = generate_phantom(small_phantom_config(seed=43))
    assert not np.array_equal(a.data, c.data)


def test_degenerate_config_is_piecewise_constant():
    cfg = small_phantom_config(texture_amplitude=0.0, deformation_amplitude=0.0)
    values = np.unique(generate_phantom(cfg).data)
    allowed = {0.0, cfg.skin_value, cfg.adipose_value}
    allowed |= {e.value for e in cfg.fibro_ellipses}
    allowed |= {c.value for c in cfg.calcifications}
    assert set(values) <= allowed


def test_phantom_value_bounds():
    for seed in range(10):
        cfg = small_phantom_config(seed=seed)
        values = generate_phantom(cfg).data
        assert np.all(np.isfinite(values))
        assert np.all(values >= 0.0)
        top = max([cfg.skin_value, cfg.adipose_value]
                  + [e.value for e in cfg.fibro_ellipses]
                  + [c.value for c in cfg.calcifications])
        assert values.max() <= top * (1.0 + cfg.texture_amplitude) + 1e-15


def test_phantom_config_validation():
    with pytest.raises(ValueError):
        small_phantom_config(texture_amplitude=1.5)
    with pytest.raises(ValueError):
        small_phantom_config(deformation_amplitude=0.5)
    with pytest.raises(ValueError):
        small_phantom_config(adipose_value=-0.1)


def test_warp_makes_boundary_noncircular():
    warped = generate_phantom(small_phantom_config(seed=3, texture_amplitude=0.0))
    round_ = generate_phantom(small_phantom_config(
        seed=3, texture_amplitude=0.0, deformation_amplitude=0.0))
    assert not np.array_equal(warped.data != 0, round_.data != 0)


def test_downsample_examples():
    grid = GridSpec(2, 10.0)
    img = Image(grid, np.array([0.0, 0.0, 4.0, 4.0]))
    out = downsample_image(img, 2)
    np.testing.assert_array_equal(out.data, [2.0])
    const = Image(GridSpec(4, 10.0), np.full(16, 3.3))
    np.testing.assert_allclose(downsample_image(const, 2).data, 3.3)


def test_downsample_linearity(rng):
    grid = GridSpec(8, 10.0)
    a = rng.standard_normal(64)
    b = rng.standard_normal(64)
    left = downsample_image(Image(grid, a + b), 2).data
    right = downsample_image(Image(grid, a), 2).data + downsample_image(Image(grid, b), 2).data
    np.testing.assert_allclose(left, right, rtol=1e-13, atol=1e-15)


def test_downsample_rejects_bad_factor():
    with pytest.raises(ValueError):
        downsample_image(Image.zeros(GridSpec(8, 10.0)), 3)


def test_simulate_zero_phantom(tiny_geom):
    hi = Image.zeros(GridSpec(64, 100.0))
    assert not simulate_sinogram(hi, tiny_geom).data.any()


def test_simulate_linearity(tiny_geom, rng):
    hi_grid = GridSpec(64, 100.0)
    a = rng.standard_normal(hi_grid.n_pixels)
    b = rng.standard_normal(hi_grid.n_pixels)
    left = simulate_sinogram(Image(hi_grid, a + b), tiny_geom).data
    right = (simulate_sinogram(Image(hi_grid, a), tiny_geom).data
             + simulate_sinogram(Image(hi_grid, b), tiny_geom).data)
    np.testing.assert_allclose(left, right, rtol=1e-12, atol=1e-12)


def test_simulate_rejects_incompatible_grids(tiny_geom):
    with pytest.raises(ValueError):
        simulate_sinogram(Image.zeros(GridSpec(24, 100.0)), tiny_geom)  # not a multiple
    with pytest.raises(ValueError):
        simulate_sinogram(Image.zeros(GridSpec(16, 100.0)), tiny_geom)  # factor 1
    with pytest.raises(ValueError):
        simulate_sinogram(Image.zeros(GridSpec(64, 50.0)), tiny_geom)  # fov mismatch


def test_inverse_crime_avoided_but_small():
    grid = GridSpec(64, 100.0)
    geom = make_fan_geometry(12, 48, grid)
    hi_grid = GridSpec(256, 100.0)
    radius = 30.0
    coords_hi = make_grid_coords(hi_grid) * hi_grid.fov
    disk_hi = Image(hi_grid, (np.linalg.norm(coords_hi - 50.0, axis=1) <= radius).astype(float))
    from_hi = simulate_sinogram(disk_hi, geom).data
    from_lo = forward_project(downsample_image(disk_hi, 4), geom).data
    rel = np.linalg.norm(from_hi - from_lo) / np.linalg.norm(from_hi)
    assert 1e-6 < rel < 1e-2


def test_noise_deterministic(tiny_geom, rng):
    sino = Sinogram(tiny_geom, np.abs(rng.standard_normal(tiny_geom.n_rays)))
    cfg = NoiseConfig(total_photons=1e9, seed=5)
    a = add_poisson_noise(sino, cfg)
    b = add_poisson_noise(sino, cfg)
    np.testing.assert_array_equal(a.data, b.data)


def test_noise_vanishes_at_huge_intensity(tiny_geom, rng):
    y = np.abs(rng.standard_normal(tiny_geom.n_rays))
    sino = Sinogram(tiny_geom, y)
    cfg = NoiseConfig(total_photons=1e14 * tiny_geom.n_rays, seed=1)
    noisy = add_poisson_noise(sino, cfg).data
    assert np.linalg.norm(noisy - y) / np.linalg.norm(y) < 1e-5


def test_noise_single_ray_mean_matches_enumerated_expectation():
    geom = make_fan_geometry(1, 2, GridSpec(4, 10.0))
    y_value = 2.0
    incident = 100.0 * np.exp(y_value)  # Poisson rate I0 exp(-y) = 100
    total = incident * geom.n_rays
    draws = np.empty(10_000)
    for i in range(draws.size):
        noisy = add_poisson_noise(
            Sinogram(geom, np.full(geom.n_rays, y_value)),
            NoiseConfig(total_photons=total, seed=i),
        )
        draws[i] = noisy.data[0]
    expected = poisson_post_log_mean(rate=100.0, incident=incident)
    stderr = draws.std(ddof=1) / np.sqrt(draws.size)
    assert abs(draws.mean() - expected) < 4.0 * stderr
    # the log transform biases the mean by ~1/(2*rate); it still lands near y
    assert abs(draws.mean() - y_value) < 0.01


def test_noise_rejects_negative_entries(tiny_geom):
    data = np.zeros(tiny_geom.n_rays)
    data[0] = -0.5
    with pytest.raises(ValueError):
        add_poisson_noise(Sinogram(tiny_geom, data), NoiseConfig(1e9, 0))


def test_noise_zero_counts_stay_finite(tiny_geom):
    # a tiny photon budget forces zero counts on most rays
    sino = Sinogram(tiny_geom, np.full(tiny_geom.n_rays, 5.0))
    noisy = add_poisson_noise(sino, NoiseConfig(total_photons=float(tiny_geom.n_rays), seed=2))
    assert np.all(np.isfinite(noisy.data))
