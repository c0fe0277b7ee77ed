"""Reference reconstruction baselines for masked spectral bands."""

from __future__ import annotations

import numpy as np

from .cube import HyperCube
from .errors import ValidationError
from .stats import BandStats


def _check_mask(cube: HyperCube, mask_bands: np.ndarray) -> np.ndarray:
    mask = np.unique(np.asarray(mask_bands, dtype=np.int64))
    if mask.size and (mask.min() < 0 or mask.max() >= cube.n_bands):
        raise ValidationError("masked band index out of range")
    return mask


def gaussian_sampling_baseline(cube: HyperCube, mask_bands: np.ndarray, stats: BandStats,
                               rng: np.random.Generator) -> HyperCube:
    """Fill masked bands with draws from the band-wise Gaussian N(mean, std^2).

    Unmasked bands are returned bit-identical.
    """
    mask = _check_mask(cube, mask_bands)
    if stats.n_bands != cube.n_bands:
        raise ValidationError("stats band count does not match the cube")
    data = np.array(cube.data, copy=True)
    if mask.size:
        mu = stats.mean[mask][:, None, None]
        sigma = stats.std[mask][:, None, None]
        draws = mu + sigma * rng.standard_normal((mask.size, cube.height, cube.width))
        data[mask] = draws.astype(np.float32)
    return cube.with_data(data)


def linear_interpolation_baseline(cube: HyperCube, mask_bands: np.ndarray) -> HyperCube:
    """Fill masked bands by per-pixel linear interpolation in wavelength.

    The nearest unmasked bands below and above each masked band provide the
    endpoints; beyond the outermost unmasked band the value clamps to it.
    """
    mask = _check_mask(cube, mask_bands)
    unmasked = np.setdiff1d(np.arange(cube.n_bands), mask)
    if unmasked.size == 0:
        raise ValidationError("cannot interpolate: all bands are masked")
    data = np.array(cube.data, copy=True)
    if mask.size == 0:
        return cube.with_data(data)

    centers = cube.centers_nm
    known_wl = centers[unmasked]
    pos = np.searchsorted(known_wl, centers[mask])
    lo = np.clip(pos - 1, 0, unmasked.size - 1)
    hi = np.clip(pos, 0, unmasked.size - 1)
    span = known_wl[hi] - known_wl[lo]
    t = np.where(span > 0, (centers[mask] - known_wl[lo]) / np.where(span > 0, span, 1.0), 0.0)

    low_vals = cube.data[unmasked[lo]].astype(np.float64)
    high_vals = cube.data[unmasked[hi]].astype(np.float64)
    filled = (1.0 - t)[:, None, None] * low_vals + t[:, None, None] * high_vals
    data[mask] = filled.astype(np.float32)
    return cube.with_data(data)
