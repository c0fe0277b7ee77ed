"""Streaming band statistics and normalization.

Band statistics accumulate one cube at a time: per-cube moments are combined
into the running state with the standard parallel-variance merge, which is
algebraically the batched form of Welford's update. Standard deviations are
population (divide by N), matching the normalization convention used by the
reconstruction pipeline.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .bands import BandSpec, band_centers
from .cube import HyperCube
from .errors import ValidationError

# Guard for constant bands: sigma is clamped to this floor at use time.
SIGMA_FLOOR = 1e-8

# Band identity tolerance when matching stats to cubes.
CENTER_TOL_NM = 0.01


@dataclass(frozen=True)
class BandStats:
    """Per-band running mean and squared-deviation sum over observed pixels."""

    count: int
    mean: np.ndarray  # (B,) float64
    m2: np.ndarray    # (B,) float64, sum of squared deviations from the mean
    centers_nm: np.ndarray | None = None

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=np.float64)
        m2 = np.asarray(self.m2, dtype=np.float64)
        if mean.ndim != 1 or mean.shape != m2.shape:
            raise ValidationError("mean and m2 must be 1-D arrays of equal length")
        if self.count < 0:
            raise ValidationError("count must be >= 0")
        if self.count > 0 and np.any(m2 < -1e-9):
            raise ValidationError("m2 must be non-negative")
        centers = self.centers_nm
        if centers is not None:
            centers = np.asarray(centers, dtype=np.float64)
            if centers.shape != mean.shape:
                raise ValidationError("centers_nm length must match band count")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "m2", np.maximum(m2, 0.0))
        object.__setattr__(self, "centers_nm", centers)

    @classmethod
    def empty(cls, n_bands: int) -> "BandStats":
        return cls(count=0, mean=np.zeros(n_bands), m2=np.zeros(n_bands))

    @property
    def n_bands(self) -> int:
        return self.mean.shape[0]

    @property
    def std(self) -> np.ndarray:
        """Population standard deviation per band."""
        if self.count <= 0:
            raise ValidationError("no pixels observed yet")
        return np.sqrt(self.m2 / self.count)

    def pooled(self) -> "GlobalStats":
        """Scalar mean/std over all bands and pixels (law of total variance)."""
        if self.count <= 0:
            raise ValidationError("no pixels observed yet")
        grand_mean = float(self.mean.mean())
        within = float(self.m2.sum()) / (self.count * self.n_bands)
        between = float(((self.mean - grand_mean) ** 2).mean())
        return GlobalStats(mean=grand_mean, std=float(np.sqrt(within + between)))


def _cube_moments(cube: HyperCube) -> tuple[int, np.ndarray, np.ndarray]:
    flat = cube.data.reshape(cube.n_bands, -1).astype(np.float64)
    n = flat.shape[1]
    mean = flat.mean(axis=1)
    m2 = ((flat - mean[:, None]) ** 2).sum(axis=1)
    return n, mean, m2


def merge_stats(a: BandStats, b: BandStats) -> BandStats:
    """Combine two accumulators over disjoint pixel sets."""
    if a.n_bands != b.n_bands:
        raise ValidationError(f"band count mismatch: {a.n_bands} vs {b.n_bands}")
    if a.count == 0:
        return b
    if b.count == 0:
        return a
    count = a.count + b.count
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.count / count)
    m2 = a.m2 + b.m2 + delta**2 * (a.count * b.count / count)
    centers = a.centers_nm if a.centers_nm is not None else b.centers_nm
    return BandStats(count=count, mean=mean, m2=m2, centers_nm=centers)


def accumulate_stats(stats: BandStats, cube: HyperCube) -> BandStats:
    """Fold one cube's pixels into the running per-band statistics."""
    if stats.count > 0 and stats.n_bands != cube.n_bands:
        raise ValidationError(
            f"band count mismatch: stats cover {stats.n_bands} bands, cube has {cube.n_bands}"
        )
    n, mean, m2 = _cube_moments(cube)
    update = BandStats(count=n, mean=mean, m2=m2, centers_nm=cube.centers_nm)
    if stats.count == 0:
        return update
    return merge_stats(stats, update)


def stats_over_cubes(cubes: Iterable[HyperCube]) -> BandStats:
    stats: BandStats | None = None
    for cube in cubes:
        stats = accumulate_stats(stats if stats is not None else BandStats.empty(cube.n_bands), cube)
    if stats is None or stats.count == 0:
        raise ValidationError("no cubes given")
    return stats


def _check_stats_match(cube: HyperCube, stats: BandStats) -> None:
    if stats.count <= 0:
        raise ValidationError("statistics are empty")
    if stats.n_bands != cube.n_bands:
        raise ValidationError(
            f"band count mismatch: stats cover {stats.n_bands} bands, cube has {cube.n_bands}"
        )
    if stats.centers_nm is not None:
        if np.max(np.abs(stats.centers_nm - cube.centers_nm)) > CENTER_TOL_NM:
            raise ValidationError("stats band centers do not match cube bands")


def normalize_bandwise(cube: HyperCube, stats: BandStats) -> HyperCube:
    """Per-band (x - mean) / std with the sigma floor for constant bands."""
    _check_stats_match(cube, stats)
    sigma = np.maximum(stats.std, SIGMA_FLOOR)
    data = (cube.data - stats.mean[:, None, None]) / sigma[:, None, None]
    return cube.with_data(data.astype(np.float32))


def denormalize_bandwise(cube: HyperCube, stats: BandStats) -> HyperCube:
    """Inverse of normalize_bandwise up to float32 rounding."""
    _check_stats_match(cube, stats)
    sigma = np.maximum(stats.std, SIGMA_FLOOR)
    data = cube.data * sigma[:, None, None] + stats.mean[:, None, None]
    return cube.with_data(data.astype(np.float32))


@dataclass(frozen=True)
class GlobalStats:
    """One scalar mean/std shared by all bands (downstream normalization)."""

    mean: float
    std: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.mean) or not np.isfinite(self.std):
            raise ValidationError("global stats must be finite")

    @classmethod
    def from_values(cls, values: np.ndarray) -> "GlobalStats":
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            raise ValidationError("cannot compute global stats of an empty array")
        return cls(mean=float(values.mean()), std=float(values.std()))


@dataclass(frozen=True)
class SpectralSignature:
    """Per-band vector summarizing one patch (spatial mean reflectance)."""

    values: np.ndarray  # (B,) float64
    bands: tuple[BandSpec, ...]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValidationError("signature values must be 1-D")
        if len(self.bands) != values.shape[0]:
            raise ValidationError(
                f"signature has {values.shape[0]} values for {len(self.bands)} bands"
            )
        if not np.all(np.isfinite(values)):
            raise ValidationError("signature values must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "bands", tuple(self.bands))


def spatial_average(cube: HyperCube) -> SpectralSignature:
    """Mean reflectance over all spatial pixels, one value per band."""
    values = cube.data.reshape(cube.n_bands, -1).mean(axis=1, dtype=np.float64)
    return SpectralSignature(values=values, bands=cube.bands)


def normalize_global(sig: SpectralSignature, g: GlobalStats) -> SpectralSignature:
    """(x - mean) / std with one scalar pair across all bands."""
    if g.std <= 0:
        raise ValidationError(f"global std must be > 0, got {g.std!r}")
    return SpectralSignature(values=(sig.values - g.mean) / g.std, bands=sig.bands)


def save_stats(stats: BandStats, path: str | Path, global_stats: GlobalStats | None = None) -> None:
    """Persist per-band mean/std plus one GLOBAL row.

    The GLOBAL row defaults to the pooled all-band statistics.
    """
    if global_stats is None:
        global_stats = stats.pooled()
    std = stats.std
    centers = stats.centers_nm
    path = Path(path)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["band_index", "center_nm", "mean", "std"])
        for i in range(stats.n_bands):
            center = "" if centers is None else repr(float(centers[i]))
            writer.writerow([i, center, repr(float(stats.mean[i])), repr(float(std[i]))])
        writer.writerow(["GLOBAL", "", repr(global_stats.mean), repr(global_stats.std)])


def load_stats(path: str | Path) -> tuple[BandStats, GlobalStats | None]:
    """Read a stats CSV back.

    The loaded accumulator carries count=1 with m2=std**2: enough to drive
    normalization exactly, not to resume accumulation.
    """
    path = Path(path)
    means: list[float] = []
    stds: list[float] = []
    centers: list[float] = []
    have_centers = True
    global_stats: GlobalStats | None = None
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != ["band_index", "center_nm", "mean", "std"]:
            raise ValidationError(f"stats CSV {path} has unexpected columns")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 columns")
            if row[0] == "GLOBAL":
                global_stats = GlobalStats(mean=float(row[2]), std=float(row[3]))
                continue
            try:
                idx = int(row[0])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: bad band index {row[0]!r}") from exc
            if idx != len(means):
                raise ValidationError(f"{path}:{lineno}: band indices must be contiguous")
            if row[1] == "":
                have_centers = False
            else:
                centers.append(float(row[1]))
            means.append(float(row[2]))
            stds.append(float(row[3]))
    if not means:
        raise ValidationError(f"stats CSV {path} contains no bands")
    stats = BandStats(
        count=1,
        mean=np.array(means),
        m2=np.array(stds, dtype=np.float64) ** 2,
        centers_nm=np.array(centers) if have_centers else None,
    )
    return stats, global_stats


def signatures_matrix(signatures: Sequence[SpectralSignature]) -> np.ndarray:
    """Stack signatures sharing a band structure into an (N, B) matrix."""
    if not signatures:
        raise ValidationError("empty signature list")
    first = signatures[0]
    for s in signatures[1:]:
        if s.bands != first.bands:
            raise ValidationError("signatures do not share band structure")
    return np.stack([s.values for s in signatures])
