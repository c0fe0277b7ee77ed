"""Deterministic synthetic scenes, sensors, and gas labels with known truth.

Scenes mix a few smooth endmember spectra (random cubic splines over
wavelength) through blobby abundance maps, then apply multiplicative Gaussian
absorption lines whose per-scene depths are recorded as ground truth. Labels
are affine in a chosen line's true depth, so a narrow-band sensor can recover
them while broad bands alias the signal.

Randomness is consumed in a fixed order (spectra, abundances, depths, noise);
scene batches derive child seeds from a master seed via SeedSequence.spawn.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .bands import BandSpec, bands_from_arrays
from .cube import HyperCube
from .errors import ValidationError
from .labels import GAS_UNITS, GasLabelSet
from .srf import SRFBand, SRFTable
from .stats import spatial_average

FWHM_TO_SIGMA = 2.0 * np.sqrt(2.0 * np.log(2.0))

# Affine label maps per gas: value = intercept + slope * depth.
LABEL_AFFINE = {"CH4": (1800.0, 400.0), "CO2": (415.0, 40.0), "NO2": (1e-4, 2e-4)}


@dataclass(frozen=True)
class AbsorptionLine:
    """Multiplicative Gaussian dip: 1 - depth * exp(-(lam-center)^2 / (2 width^2))."""

    center_nm: float
    width_nm: float
    max_depth: float

    def __post_init__(self) -> None:
        if not 400.0 <= self.center_nm <= 2500.0:
            raise ValidationError(f"line center {self.center_nm!r} outside [400, 2500] nm")
        if self.width_nm <= 0:
            raise ValidationError("line width must be > 0")
        if not 0.0 <= self.max_depth < 1.0:
            raise ValidationError(f"max depth must be in [0, 1), got {self.max_depth!r}")


@dataclass(frozen=True)
class SceneConfig:
    n_bands: int = 48
    height: int = 8
    width: int = 8
    wavelength_lo_nm: float = 420.0
    wavelength_hi_nm: float = 2450.0
    n_endmembers: int = 3
    n_blobs: int = 4
    blob_scale: float = 0.4
    spline_knots: int = 8
    lines: tuple[AbsorptionLine, ...] = field(default_factory=tuple)
    noise_std: float = 0.0
    raw_scale: float = 10000.0

    def __post_init__(self) -> None:
        if min(self.n_bands, self.height, self.width) < 1:
            raise ValidationError("scene dimensions must be >= 1")
        if not 400.0 <= self.wavelength_lo_nm < self.wavelength_hi_nm <= 2500.0:
            raise ValidationError("wavelength range must sit inside [400, 2500] nm")
        if self.n_endmembers < 1 or self.n_blobs < 1 or self.spline_knots < 4:
            raise ValidationError("need >= 1 endmember, >= 1 blob, >= 4 spline knots")
        if self.noise_std < 0 or self.raw_scale <= 0:
            raise ValidationError("noise_std must be >= 0 and raw_scale > 0")
        object.__setattr__(self, "lines", tuple(self.lines))

    def band_specs(self) -> tuple[BandSpec, ...]:
        centers = self.band_centers()
        if self.n_bands > 1:
            fwhm = float(centers[1] - centers[0])
        else:
            fwhm = self.wavelength_hi_nm - self.wavelength_lo_nm
        return bands_from_arrays(centers, np.full(self.n_bands, fwhm))

    def band_centers(self) -> np.ndarray:
        return np.linspace(self.wavelength_lo_nm, self.wavelength_hi_nm, self.n_bands)


@dataclass(frozen=True)
class Scene:
    """Generated cube plus its ground-truth absorption depths."""

    cube: HyperCube
    depths: tuple[float, ...]


def smooth_spectra(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """(E, B) endmember reflectance spectra in [0.02, ~1], smooth in wavelength."""
    knots = np.linspace(cfg.wavelength_lo_nm, cfg.wavelength_hi_nm, cfg.spline_knots)
    centers = cfg.band_centers()
    spectra = np.empty((cfg.n_endmembers, cfg.n_bands))
    for e in range(cfg.n_endmembers):
        values = rng.uniform(0.15, 0.85, size=cfg.spline_knots)
        spline = CubicSpline(knots, values)
        spectra[e] = np.clip(spline(centers), 0.02, 1.2)
    return spectra


def abundance_maps(cfg: SceneConfig, rng: np.random.Generator) -> np.ndarray:
    """(E, H, W) per-pixel mixing weights, smooth blobs normalized to sum 1."""
    yy, xx = np.mgrid[0 : cfg.height, 0 : cfg.width]
    maps = np.full((cfg.n_endmembers, cfg.height, cfg.width), 0.05)
    extent = max(cfg.height, cfg.width)
    for e in range(cfg.n_endmembers):
        for _ in range(cfg.n_blobs):
            cy = rng.uniform(0, cfg.height)
            cx = rng.uniform(0, cfg.width)
            scale = cfg.blob_scale * extent * rng.uniform(0.5, 1.5)
            amp = rng.uniform(0.2, 1.0)
            maps[e] += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * scale**2))
    return maps / maps.sum(axis=0, keepdims=True)


def absorption_transmittance(centers_nm: np.ndarray, lines: Sequence[AbsorptionLine],
                             depths: Sequence[float]) -> np.ndarray:
    """(B,) multiplicative transmittance of the lines at the given depths."""
    if len(lines) != len(depths):
        raise ValidationError("one depth per absorption line required")
    trans = np.ones_like(np.asarray(centers_nm, dtype=np.float64))
    for line, depth in zip(lines, depths):
        if not 0.0 <= depth < 1.0:
            raise ValidationError(f"depth {depth!r} outside [0, 1)")
        profile = np.exp(-((centers_nm - line.center_nm) ** 2) / (2.0 * line.width_nm**2))
        trans *= 1.0 - depth * profile
    return trans


def gen_scene(cfg: SceneConfig, rng: np.random.Generator, patch_id: str = "scene_0000",
              tile_id: str = "tile_000", spectra: np.ndarray | None = None) -> Scene:
    """One deterministic scene; depths are drawn uniform [0, max_depth) per line.

    ``spectra`` lets a dataset share one endmember library across scenes;
    by default each scene draws its own.
    """
    if spectra is None:
        spectra = smooth_spectra(cfg, rng)
    maps = abundance_maps(cfg, rng)
    base = np.einsum("eb,ehw->bhw", spectra, maps) * cfg.raw_scale
    depths = tuple(float(rng.uniform(0.0, line.max_depth)) if line.max_depth > 0 else 0.0
                   for line in cfg.lines)
    data = base * absorption_transmittance(cfg.band_centers(), cfg.lines, depths)[:, None, None]
    if cfg.noise_std > 0:
        data = data + rng.normal(0.0, cfg.noise_std, size=data.shape)
    cube = HyperCube(data=data.astype(np.float32), bands=cfg.band_specs(),
                     patch_id=patch_id, tile_id=tile_id)
    return Scene(cube=cube, depths=depths)


def gen_dataset(cfg: SceneConfig, n_scenes: int, master_seed: int,
                patches_per_tile: int = 4, shared_spectra: bool = True) -> list[Scene]:
    """Scenes with child seeds spawned from the master seed; tiles group patches.

    With ``shared_spectra`` the whole dataset mixes one endmember library
    (drawn from the first child seed), so scenes differ in abundances, line
    depths, and noise only; inter-band structure is then consistent across
    the dataset.
    """
    if n_scenes < 1 or patches_per_tile < 1:
        raise ValidationError("need >= 1 scene and >= 1 patch per tile")
    seeds = np.random.SeedSequence(master_seed).spawn(n_scenes + 1)
    spectra = smooth_spectra(cfg, np.random.default_rng(seeds[0])) if shared_spectra else None
    scenes = []
    for i, seed in enumerate(seeds[1:]):
        scenes.append(
            gen_scene(cfg, np.random.default_rng(seed), spectra=spectra,
                      patch_id=f"scene_{i:04d}", tile_id=f"tile_{i // patches_per_tile:03d}")
        )
    return scenes


def gen_sensor(defs: Sequence[tuple[float, float]], names: Sequence[str] | None = None) -> SRFTable:
    """Gaussian SRF per (center, fwhm), sampled every 1 nm out to +-3 sigma."""
    if names is None:
        names = [f"B{i + 1:02d}" for i in range(len(defs))]
    bands = []
    for name, (center, fwhm) in zip(names, defs):
        sigma = fwhm / FWHM_TO_SIGMA
        reach = int(np.floor(3.0 * sigma))
        offsets = np.arange(-reach, reach + 1, dtype=np.float64)
        bands.append(
            SRFBand(
                name=name,
                spec=BandSpec(center, fwhm),
                wavelengths_nm=center + offsets,
                responses=np.exp(-(offsets**2) / (2.0 * sigma**2)),
            )
        )
    return SRFTable(bands=tuple(bands))


def gen_labels(scenes: Sequence[Scene], line_index: int, noise_std: float,
               rng: np.random.Generator, gas: str = "CH4") -> GasLabelSet:
    """Labels affine in each scene's true depth of one line, plus Gaussian noise."""
    if gas not in LABEL_AFFINE:
        raise ValidationError(f"unknown gas {gas!r}")
    if noise_std < 0:
        raise ValidationError("label noise must be >= 0")
    intercept, slope = LABEL_AFFINE[gas]
    values: dict[str, float] = {}
    for scene in scenes:
        if not 0 <= line_index < len(scene.depths):
            raise ValidationError(f"line index {line_index} out of range")
        noise = float(rng.normal(0.0, noise_std)) if noise_std > 0 else 0.0
        values[scene.cube.patch_id] = intercept + slope * scene.depths[line_index] + noise
    return GasLabelSet(gas=gas, units=GAS_UNITS[gas], values=values)


def measure_line_depth(cube: HyperCube, line: AbsorptionLine) -> float:
    """Direct line-depth estimate from the spatially averaged spectrum.

    The continuum at the line center is interpolated linearly between the
    nearest bands outside +-3 widths; depth = 1 - value / continuum.
    """
    sig = spatial_average(cube)
    centers = cube.centers_nm
    inside = np.abs(centers - line.center_nm) <= 3.0 * line.width_nm
    below = np.flatnonzero(~inside & (centers < line.center_nm))
    above = np.flatnonzero(~inside & (centers > line.center_nm))
    if below.size == 0 or above.size == 0:
        raise ValidationError("no continuum bands on both sides of the line")
    lo, hi = below[-1], above[0]
    t = (line.center_nm - centers[lo]) / (centers[hi] - centers[lo])
    continuum = (1.0 - t) * sig.values[lo] + t * sig.values[hi]
    center_band = int(np.argmin(np.abs(centers - line.center_nm)))
    if continuum <= 0:
        raise ValidationError("non-positive continuum estimate")
    return float(1.0 - sig.values[center_band] / continuum)


MANIFEST_COLUMNS = ["patch_id", "tile_id", "depths"]


def save_manifest(scenes: Sequence[Scene], path: str | Path) -> None:
    """Ground-truth depth manifest for oracle tests."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MANIFEST_COLUMNS)
        for scene in scenes:
            writer.writerow([
                scene.cube.patch_id, scene.cube.tile_id,
                " ".join(repr(d) for d in scene.depths),
            ])


def load_manifest(path: str | Path) -> dict[str, tuple[float, ...]]:
    path = Path(path)
    depths: dict[str, tuple[float, ...]] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != MANIFEST_COLUMNS:
            raise ValidationError(f"manifest CSV {path} has unexpected columns")
        for row in reader:
            if not row:
                continue
            depths[row[0]] = tuple(float(v) for v in row[2].split()) if row[2] else ()
    return depths
