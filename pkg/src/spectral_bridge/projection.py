"""Project hyperspectral cubes into a broad-band sensor's spectral space.

Each target band's weight over a source band is the sum of the SRF samples
falling inside that source band's FWHM interval; columns are normalized to
unit sum, so spectrally constant cubes are fixed points of the projection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bands import BandSpec, band_centers, band_fwhms, validate_band_order
from .cube import HyperCube
from .errors import ValidationError
from .srf import SRFTable

COLUMN_SUM_TOL = 1e-6
CENTER_TOL_NM = 0.01


@dataclass(frozen=True)
class WeightMatrix:
    """Column-stochastic source-band x target-band weights."""

    weights: np.ndarray  # (B_source, B_target) float64
    source_bands: tuple[BandSpec, ...]
    target_bands: tuple[BandSpec, ...]

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValidationError("weights must be 2-D")
        if w.shape != (len(self.source_bands), len(self.target_bands)):
            raise ValidationError(
                f"weights shape {w.shape} does not match "
                f"{len(self.source_bands)} source x {len(self.target_bands)} target bands"
            )
        if np.any(w < 0):
            raise ValidationError("weights must be non-negative")
        sums = w.sum(axis=0)
        bad = np.flatnonzero(np.abs(sums - 1.0) > COLUMN_SUM_TOL)
        if bad.size:
            raise ValidationError(
                f"columns {bad.tolist()} do not sum to 1 (sums {sums[bad].tolist()})"
            )
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "source_bands", validate_band_order(self.source_bands))
        object.__setattr__(self, "target_bands", validate_band_order(self.target_bands))


def _covering_band(wl: float, lo: np.ndarray, hi: np.ndarray) -> int:
    """Index of the lowest-wavelength source band whose closed FWHM interval
    contains ``wl``; -1 when uncovered. Edge ties therefore resolve to the
    lower band, never double-counting a sample."""
    inside = np.flatnonzero((lo <= wl) & (wl <= hi))
    return int(inside[0]) if inside.size else -1


def build_weight_matrix(srf: SRFTable, source_bands: Sequence[BandSpec]) -> WeightMatrix:
    """Accumulate SRF samples into source-band bins and normalize per column."""
    source_bands = validate_band_order(source_bands)
    centers = band_centers(source_bands)
    half = band_fwhms(source_bands) / 2.0
    lo, hi = centers - half, centers + half

    weights = np.zeros((len(source_bands), srf.n_bands), dtype=np.float64)
    for j, band in enumerate(srf.bands):
        for wl, resp in zip(band.wavelengths_nm, band.responses):
            i = _covering_band(float(wl), lo, hi)
            if i >= 0:
                weights[i, j] += resp

    sums = weights.sum(axis=0)
    orphans = [srf.bands[j].name for j in np.flatnonzero(sums <= 0.0)]
    if orphans:
        raise ValidationError(
            f"target bands with no source-band overlap (cannot normalize): {orphans}"
        )
    weights /= sums
    return WeightMatrix(
        weights=weights, source_bands=source_bands, target_bands=srf.target_bands
    )


def project_cube(cube: HyperCube, wm: WeightMatrix) -> HyperCube:
    """Apply the weight matrix along the spectral axis of the cube."""
    if cube.n_bands != len(wm.source_bands):
        raise ValidationError(
            f"band count mismatch: cube has {cube.n_bands} bands, "
            f"weight matrix expects {len(wm.source_bands)}"
        )
    diff = np.abs(cube.centers_nm - band_centers(wm.source_bands))
    if np.max(diff) > CENTER_TOL_NM:
        raise ValidationError("cube band centers do not match the weight matrix source bands")
    projected = np.einsum(
        "st,shw->thw", wm.weights, cube.data.astype(np.float64), optimize=True
    )
    return HyperCube(
        data=projected.astype(np.float32),
        bands=wm.target_bands,
        patch_id=cube.patch_id,
        tile_id=cube.tile_id,
    )
