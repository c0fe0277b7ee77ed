"""Band metadata: center wavelength plus full width at half maximum."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError

# Spectral range covered by the supported sensors.
WAVELENGTH_MIN_NM = 400.0
WAVELENGTH_MAX_NM = 2500.0


@dataclass(frozen=True)
class BandSpec:
    """One spectral band: center wavelength and FWHM, both in nanometers."""

    center_nm: float
    fwhm_nm: float

    def __post_init__(self) -> None:
        center = float(self.center_nm)
        fwhm = float(self.fwhm_nm)
        if not np.isfinite(center) or not (WAVELENGTH_MIN_NM <= center <= WAVELENGTH_MAX_NM):
            raise ValidationError(
                f"band center {center!r} nm outside [{WAVELENGTH_MIN_NM:g}, {WAVELENGTH_MAX_NM:g}]"
            )
        if not np.isfinite(fwhm) or fwhm <= 0:
            raise ValidationError(f"band fwhm must be > 0, got {fwhm!r}")
        object.__setattr__(self, "center_nm", center)
        object.__setattr__(self, "fwhm_nm", fwhm)


def validate_band_order(bands: Sequence[BandSpec]) -> tuple[BandSpec, ...]:
    """Require strictly increasing center wavelengths; return as a tuple."""
    bands = tuple(bands)
    centers = [b.center_nm for b in bands]
    for i in range(1, len(centers)):
        if centers[i] <= centers[i - 1]:
            raise ValidationError(
                f"band centers must be strictly increasing: "
                f"band {i} at {centers[i]:g} nm follows {centers[i - 1]:g} nm"
            )
    return bands


def band_centers(bands: Iterable[BandSpec]) -> np.ndarray:
    """Center wavelengths as a float64 vector."""
    return np.array([b.center_nm for b in bands], dtype=np.float64)


def band_fwhms(bands: Iterable[BandSpec]) -> np.ndarray:
    """FWHM values as a float64 vector."""
    return np.array([b.fwhm_nm for b in bands], dtype=np.float64)


def bands_from_arrays(centers: Iterable[float], fwhms: Iterable[float]) -> tuple[BandSpec, ...]:
    return validate_band_order(
        BandSpec(float(c), float(f)) for c, f in zip(centers, fwhms, strict=True)
    )
