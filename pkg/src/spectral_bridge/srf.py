"""Tabulated spectral response functions of the target multispectral sensor."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bands import BandSpec, validate_band_order
from .errors import ValidationError

SRF_COLUMNS = ["band_name", "center_nm", "fwhm_nm", "sample_nm", "response"]


@dataclass(frozen=True)
class SRFBand:
    """One target band: its spec plus sampled response curve."""

    name: str
    spec: BandSpec
    wavelengths_nm: np.ndarray  # (M,) strictly increasing
    responses: np.ndarray       # (M,) >= 0

    def __post_init__(self) -> None:
        wl = np.asarray(self.wavelengths_nm, dtype=np.float64)
        resp = np.asarray(self.responses, dtype=np.float64)
        if wl.ndim != 1 or wl.shape != resp.shape or wl.size == 0:
            raise ValidationError(f"SRF band {self.name!r}: samples must be equal-length 1-D arrays")
        if np.any(np.diff(wl) <= 0):
            raise ValidationError(f"SRF band {self.name!r}: sample wavelengths must be strictly increasing")
        if np.any(resp < 0) or not np.all(np.isfinite(resp)):
            raise ValidationError(f"SRF band {self.name!r}: responses must be finite and >= 0")
        wl.flags.writeable = False
        resp.flags.writeable = False
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "responses", resp)


@dataclass(frozen=True)
class SRFTable:
    """Ordered SRF curves for every band of the target sensor."""

    bands: tuple[SRFBand, ...]

    def __post_init__(self) -> None:
        bands = tuple(self.bands)
        if not bands:
            raise ValidationError("SRF table has no bands")
        names = [b.name for b in bands]
        if len(set(names)) != len(names):
            raise ValidationError("SRF band names must be unique")
        validate_band_order([b.spec for b in bands])
        object.__setattr__(self, "bands", bands)

    @property
    def target_bands(self) -> tuple[BandSpec, ...]:
        return tuple(b.spec for b in self.bands)

    @property
    def n_bands(self) -> int:
        return len(self.bands)


def load_srf(path: str | Path) -> SRFTable:
    """Read an SRF CSV (band_name,center_nm,fwhm_nm,sample_nm,response)."""
    path = Path(path)
    order: list[str] = []
    rows: dict[str, dict] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != SRF_COLUMNS:
            raise ValidationError(f"SRF CSV {path} must have columns {','.join(SRF_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise ValidationError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            name = row[0].strip()
            try:
                center, fwhm, wl, resp = (float(v) for v in row[1:])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: unparseable numeric field") from exc
            if name not in rows:
                order.append(name)
                rows[name] = {"center": center, "fwhm": fwhm, "wl": [], "resp": []}
            elif rows[name]["center"] != center or rows[name]["fwhm"] != fwhm:
                raise ValidationError(f"{path}:{lineno}: inconsistent center/fwhm for band {name!r}")
            rows[name]["wl"].append(wl)
            rows[name]["resp"].append(resp)
    bands = [
        SRFBand(
            name=name,
            spec=BandSpec(rows[name]["center"], rows[name]["fwhm"]),
            wavelengths_nm=np.array(rows[name]["wl"]),
            responses=np.array(rows[name]["resp"]),
        )
        for name in order
    ]
    return SRFTable(bands=tuple(bands))


def save_srf(table: SRFTable, path: str | Path) -> None:
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SRF_COLUMNS)
        for band in table.bands:
            for wl, resp in zip(band.wavelengths_nm, band.responses):
                writer.writerow(
                    [band.name, repr(band.spec.center_nm), repr(band.spec.fwhm_nm), repr(float(wl)), repr(float(resp))]
                )
