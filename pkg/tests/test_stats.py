import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_bridge.cube import HyperCube
from spectral_bridge.errors import ValidationError
from spectral_bridge.stats import (BandStats, GlobalStats, accumulate_stats,
                                   denormalize_bandwise, load_stats, merge_stats,
                                   normalize_bandwise, normalize_global, save_stats,
                                   spatial_average, stats_over_cubes)

from conftest import make_bands, make_cube


def two_pass(values):
    # independent mean/population-variance oracle
    values = np.asarray(values, dtype=np.float64)
    mean = values.sum() / values.size
    var = ((values - mean) ** 2).sum() / values.size
    return mean, np.sqrt(var)


def cube_from_values(values):
    data = np.asarray(values, dtype=np.float32).reshape(1, -1, 1)
    return HyperCube(data=data, bands=make_bands(1), patch_id="p", tile_id="t")


def test_simple_stream_1_2_3():
    stats = BandStats.empty(1)
    for v in (1.0, 2.0, 3.0):
        stats = accumulate_stats(stats, cube_from_values([v]))
    assert stats.mean[0] == pytest.approx(2.0, abs=1e-12)
    assert stats.std[0] == pytest.approx(0.8164965809, abs=1e-9)


def test_constant_band_zero_std():
    stats = accumulate_stats(BandStats.empty(1), cube_from_values([5.0, 5.0, 5.0, 5.0]))
    assert stats.std[0] == 0.0


def test_order_independence(rng):
    a = make_cube(rng, b=3, h=5, w=4, scale=10.0)
    b = make_cube(rng, b=3, h=5, w=4, scale=3.0)
    ab = accumulate_stats(accumulate_stats(BandStats.empty(3), a), b)
    ba = accumulate_stats(accumulate_stats(BandStats.empty(3), b), a)
    np.testing.assert_allclose(ab.mean, ba.mean, rtol=1e-9)
    np.testing.assert_allclose(ab.std, ba.std, rtol=1e-9)
    # two-pass oracle on the concatenation
    for band in range(3):
        concat = np.concatenate([a.data[band].ravel(), b.data[band].ravel()])
        mean, std = two_pass(concat)
        assert ab.mean[band] == pytest.approx(mean, rel=1e-9)
        assert ab.std[band] == pytest.approx(std, rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), chunks=st.integers(1, 5))
def test_welford_matches_two_pass_property(seed, chunks):
    rng = np.random.default_rng(seed)
    stats = BandStats.empty(2)
    all_values = [[], []]
    for _ in range(chunks):
        h = int(rng.integers(1, 5))
        w = int(rng.integers(1, 5))
        data = rng.normal(rng.normal(0, 50), rng.uniform(0.1, 20), size=(2, h, w))
        cube = HyperCube(data=data.astype(np.float32), bands=make_bands(2),
                         patch_id="p", tile_id="t")
        stats = accumulate_stats(stats, cube)
        for band in range(2):
            all_values[band].extend(cube.data[band].ravel().tolist())
    for band in range(2):
        mean, std = two_pass(all_values[band])
        assert stats.mean[band] == pytest.approx(mean, rel=1e-9, abs=1e-12)
        assert stats.std[band] == pytest.approx(std, rel=1e-9, abs=1e-12)


def test_merge_matches_two_pass(rng):
    cubes = [make_cube(rng, b=2, h=3, w=3, scale=s) for s in (1.0, 7.0, 0.3)]
    left = stats_over_cubes(cubes[:1])
    right = stats_over_cubes(cubes[1:])
    merged = merge_stats(left, right)
    full = stats_over_cubes(cubes)
    np.testing.assert_allclose(merged.mean, full.mean, rtol=1e-12)
    np.testing.assert_allclose(merged.std, full.std, rtol=1e-12)


def test_band_count_mismatch(rng):
    stats = stats_over_cubes([make_cube(rng, b=3)])
    with pytest.raises(ValidationError, match="band count"):
        accumulate_stats(stats, make_cube(rng, b=4))


def test_normalize_direct_value():
    data = np.full((1, 1, 1), 150.0, dtype=np.float32)
    cube = HyperCube(data=data, bands=make_bands(1), patch_id="p", tile_id="t")
    stats = BandStats(count=1, mean=np.array([100.0]), m2=np.array([2500.0]))
    out = normalize_bandwise(cube, stats)
    assert out.data[0, 0, 0] == pytest.approx(1.0)
    back = denormalize_bandwise(out, stats)
    assert back.data[0, 0, 0] == pytest.approx(150.0)


def test_constant_band_normalizes_to_zero():
    cube = cube_from_values([7.0, 7.0, 7.0])
    stats = stats_over_cubes([cube])
    out = normalize_bandwise(cube, stats)
    assert np.all(out.data == 0.0)


def test_normalize_denormalize_round_trip(rng):
    cube = make_cube(rng, b=4, h=6, w=6, scale=100.0)
    stats = stats_over_cubes([cube, make_cube(rng, b=4, h=6, w=6, scale=80.0)])
    back = denormalize_bandwise(normalize_bandwise(cube, stats), stats)
    np.testing.assert_allclose(back.data, cube.data, rtol=1e-5, atol=1e-3)


def test_training_set_normalizes_to_unit_moments(rng):
    cubes = [make_cube(rng, b=3, h=8, w=8, scale=s) for s in (5.0, 15.0, 40.0)]
    stats = stats_over_cubes(cubes)
    normalized = [normalize_bandwise(c, stats) for c in cubes]
    pooled = np.concatenate([n.data.reshape(3, -1) for n in normalized], axis=1)
    assert np.all(np.abs(pooled.mean(axis=1)) < 1e-3)
    assert np.all(np.abs(pooled.std(axis=1) - 1.0) < 1e-3)


def test_spatial_average_cases(rng):
    # 1x1 cube: signature equals the pixel spectrum
    data = np.arange(3, dtype=np.float32).reshape(3, 1, 1)
    cube = HyperCube(data=data, bands=make_bands(3), patch_id="p", tile_id="t")
    np.testing.assert_array_equal(spatial_average(cube).values, [0.0, 1.0, 2.0])
    # checkerboard of 0 and 2 averages to 1
    board = np.indices((4, 4)).sum(axis=0) % 2 * 2.0
    cube2 = HyperCube(data=board[None].astype(np.float32), bands=make_bands(1),
                      patch_id="p", tile_id="t")
    assert spatial_average(cube2).values[0] == pytest.approx(1.0)
    # brute-force loop oracle
    cube3 = make_cube(rng, b=2, h=4, w=4)
    sig = spatial_average(cube3)
    for band in range(2):
        total = 0.0
        for i in range(4):
            for j in range(4):
                total += float(cube3.data[band, i, j])
        assert sig.values[band] == pytest.approx(total / 16.0, abs=1e-7)


def test_spatial_average_permutation_invariant(rng):
    cube = make_cube(rng, b=2, h=4, w=4)
    perm = rng.permutation(16)
    shuffled = cube.data.reshape(2, 16)[:, perm].reshape(2, 4, 4)
    cube2 = cube.with_data(shuffled)
    np.testing.assert_allclose(spatial_average(cube).values,
                               spatial_average(cube2).values, rtol=1e-12)


def test_normalize_global_cases(rng):
    sig = spatial_average(make_cube(rng, b=5))
    identity = normalize_global(sig, GlobalStats(0.0, 1.0))
    np.testing.assert_array_equal(identity.values, sig.values)

    from spectral_bridge.stats import SpectralSignature
    two = SpectralSignature(values=np.array([10.0, 20.0]), bands=make_bands(2))
    out = normalize_global(two, GlobalStats(10.0, 5.0))
    np.testing.assert_allclose(out.values, [0.0, 2.0])

    # order preserved for any positive sigma
    ranked = normalize_global(sig, GlobalStats(3.0, 0.7))
    assert np.array_equal(np.argsort(ranked.values), np.argsort(sig.values))
    with pytest.raises(ValidationError):
        normalize_global(sig, GlobalStats(0.0, 0.0))


def test_pooled_global_stats(rng):
    cubes = [make_cube(rng, b=3, h=5, w=5, scale=s) for s in (2.0, 9.0)]
    stats = stats_over_cubes(cubes)
    pooled = stats.pooled()
    everything = np.concatenate([c.data.reshape(-1) for c in cubes]).astype(np.float64)
    assert pooled.mean == pytest.approx(everything.mean(), rel=1e-9)
    assert pooled.std == pytest.approx(everything.std(), rel=1e-9)


def test_stats_csv_round_trip(tmp_path, rng):
    stats = stats_over_cubes([make_cube(rng, b=4, scale=30.0)])
    path = tmp_path / "stats.csv"
    save_stats(stats, path)
    loaded, global_stats = load_stats(path)
    np.testing.assert_allclose(loaded.mean, stats.mean, rtol=0)
    np.testing.assert_allclose(loaded.std, stats.std, rtol=0)
    assert global_stats is not None
    assert global_stats.mean == pytest.approx(stats.pooled().mean)
