import numpy as np
import pytest

from spectral_bridge.bands import BandSpec, bands_from_arrays
from spectral_bridge.cube import HyperCube


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_bands(n, lo=450.0, hi=2400.0, fwhm=None):
    centers = np.linspace(lo, hi, n)
    if fwhm is None:
        fwhm = float(centers[1] - centers[0]) if n > 1 else 50.0
    return bands_from_arrays(centers, np.full(n, fwhm))


def make_cube(rng, b=6, h=4, w=4, patch_id="p0", tile_id="t0", scale=1.0):
    data = rng.normal(0.0, scale, size=(b, h, w)).astype(np.float32)
    return HyperCube(data=data, bands=make_bands(b), patch_id=patch_id, tile_id=tile_id)


@pytest.fixture
def small_cube(rng):
    return make_cube(rng)
