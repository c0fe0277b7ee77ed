import numpy as np
import pytest

from spectral_bridge.baselines import (gaussian_sampling_baseline,
                                       linear_interpolation_baseline)
from spectral_bridge.bands import bands_from_arrays
from spectral_bridge.cube import HyperCube
from spectral_bridge.errors import ValidationError
from spectral_bridge.stats import BandStats, stats_over_cubes

from conftest import make_cube


def cube_with_centers(centers, values):
    """values[b] lists band b's value per pixel (single spatial row)."""
    arr = np.asarray(values, dtype=np.float32)[:, :, None]
    bands = bands_from_arrays(centers, np.full(len(centers), 10.0))
    return HyperCube(data=arr, bands=bands, patch_id="p", tile_id="t")


def test_gaussian_zero_std_fills_mean(rng):
    cube = make_cube(rng, b=4, h=3, w=3)
    stats = BandStats(count=10, mean=np.array([1.0, 2.0, 3.0, 4.0]), m2=np.zeros(4))
    out = gaussian_sampling_baseline(cube, np.array([1, 3]), stats, rng)
    np.testing.assert_array_equal(out.data[1], 2.0)
    np.testing.assert_array_equal(out.data[3], 4.0)


def test_gaussian_unmasked_bit_identical(rng):
    cube = make_cube(rng, b=5, h=4, w=4)
    stats = stats_over_cubes([cube])
    out = gaussian_sampling_baseline(cube, np.array([0, 2]), stats, rng)
    for band in (1, 3, 4):
        np.testing.assert_array_equal(out.data[band], cube.data[band])
    assert not np.array_equal(out.data[0], cube.data[0])


def test_gaussian_sample_mean_follows_lln(rng):
    b, h, w = 1, 128, 128
    mu, sigma = 50.0, 8.0
    cube = HyperCube(data=np.zeros((b, h, w), np.float32),
                     bands=bands_from_arrays([1000.0], [10.0]), patch_id="p", tile_id="t")
    stats = BandStats(count=10, mean=np.array([mu]), m2=np.array([sigma**2 * 10]))
    out = gaussian_sampling_baseline(cube, np.array([0]), stats, rng)
    assert abs(float(out.data[0].mean()) - mu) < 4 * sigma / 128


def test_linear_midpoint():
    cube = cube_with_centers([500.0, 600.0, 700.0], [[10.0], [0.0], [20.0]])
    out = linear_interpolation_baseline(cube, np.array([1]))
    assert out.data[1, 0, 0] == pytest.approx(15.0)


def test_linear_asymmetric_point():
    cube = cube_with_centers([500.0, 550.0, 700.0], [[10.0], [0.0], [20.0]])
    out = linear_interpolation_baseline(cube, np.array([1]))
    # hand interpolation: (550-500)/(700-500)*10 + 10
    assert out.data[1, 0, 0] == pytest.approx(12.5)


def test_linear_boundary_clamps():
    cube = cube_with_centers([500.0, 600.0, 700.0], [[0.0], [10.0], [20.0]])
    out = linear_interpolation_baseline(cube, np.array([0]))
    assert out.data[0, 0, 0] == pytest.approx(10.0)
    out2 = linear_interpolation_baseline(cube_with_centers(
        [500.0, 600.0, 700.0], [[10.0], [20.0], [0.0]]), np.array([2]))
    assert out2.data[2, 0, 0] == pytest.approx(20.0)


def test_linear_exact_on_affine_spectra(rng):
    # spectra affine in wavelength are reproduced exactly on masked bands
    centers = np.sort(rng.uniform(500, 2400, size=10))
    slope, intercept = rng.normal(size=2)
    spectra = slope * centers + intercept * 100
    data = np.tile(spectra[:, None, None], (1, 3, 3)).astype(np.float32)
    cube = HyperCube(data=data, bands=bands_from_arrays(centers, np.full(10, 5.0)),
                     patch_id="p", tile_id="t")
    mask = np.array([2, 5, 6])
    out = linear_interpolation_baseline(cube, mask)
    np.testing.assert_allclose(out.data[mask], cube.data[mask], rtol=1e-5, atol=1e-4)


def test_linear_all_masked_errors(rng):
    cube = make_cube(rng, b=3)
    with pytest.raises(ValidationError, match="all bands"):
        linear_interpolation_baseline(cube, np.array([0, 1, 2]))


def test_mask_index_validation(rng):
    cube = make_cube(rng, b=3)
    with pytest.raises(ValidationError, match="out of range"):
        linear_interpolation_baseline(cube, np.array([5]))
    stats = stats_over_cubes([cube])
    with pytest.raises(ValidationError, match="out of range"):
        gaussian_sampling_baseline(cube, np.array([-1]), stats, np.random.default_rng(0))
