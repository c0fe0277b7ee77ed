"""Reconstruction and regression quality metrics.

Reconstruction metrics operate on raw-reflectance (denormalized) cubes.
SSIM uses the printed constants C1=0.01, C2=0.03 with an 11x11 Gaussian
window (sigma 1.5), shrunk to the largest odd size that fits small images.
SAM is reported in degrees, averaged over pixels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError

SSIM_C1 = 0.01
SSIM_C2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5

RECON_COLUMNS = ["patch_id", "mae", "psnr_db", "ssim", "sam_deg"]
REGRESSION_COLUMNS = ["label", "mae", "mse", "rmse", "r2"]


def _check_shapes(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise ValidationError(f"shape mismatch: {x.shape} vs {y.shape}")


def mae_metric(x: np.ndarray, y: np.ndarray) -> float:
    """Mean absolute difference over all elements."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    _check_shapes(x, y)
    return float(np.mean(np.abs(x - y)))


def mse_metric(x: np.ndarray, y: np.ndarray) -> float:
    """Mean squared difference over all elements."""
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    _check_shapes(x, y)
    return float(np.mean((x - y) ** 2))


def psnr_metric(truth: np.ndarray, predicted: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; the peak is the ground-truth maximum.

    Returns +inf when the reconstruction is exact.
    """
    truth = np.asarray(truth, dtype=np.float64)
    mse = mse_metric(truth, predicted)
    if mse == 0.0:
        return float("inf")
    peak = float(truth.max())
    return float(10.0 * np.log10(peak * peak / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    offsets = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(offsets**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _window_means(img: np.ndarray, window: np.ndarray) -> np.ndarray:
    w = window.shape[0]
    views = np.lib.stride_tricks.sliding_window_view(img, (w, w))
    return np.tensordot(views, window, axes=([2, 3], [0, 1]))


def ssim_metric(truth: np.ndarray, predicted: np.ndarray) -> float:
    """Structural similarity averaged over Gaussian windows and bands."""
    x = np.asarray(truth, dtype=np.float64)
    y = np.asarray(predicted, dtype=np.float64)
    _check_shapes(x, y)
    if x.ndim == 2:
        x, y = x[None], y[None]
    if x.ndim != 3:
        raise ValidationError(f"SSIM expects (B, H, W) or (H, W), got {x.shape}")
    _, height, width = x.shape
    size = min(SSIM_WINDOW, height, width)
    if size % 2 == 0:
        size -= 1
    if size < 1:
        raise ValidationError("image too small for SSIM")
    window = _gaussian_window(size, SSIM_SIGMA)

    band_scores = []
    for xb, yb in zip(x, y):
        mu_x = _window_means(xb, window)
        mu_y = _window_means(yb, window)
        var_x = _window_means(xb * xb, window) - mu_x**2
        var_y = _window_means(yb * yb, window) - mu_y**2
        cov = _window_means(xb * yb, window) - mu_x * mu_y
        num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
        den = (mu_x**2 + mu_y**2 + SSIM_C1) * (var_x + var_y + SSIM_C2)
        band_scores.append(float(np.mean(num / den)))
    return float(np.mean(band_scores))


def sam_metric(truth: np.ndarray, predicted: np.ndarray) -> float:
    """Mean spectral angle over pixels, in degrees; zero-norm pixels skipped."""
    x = np.asarray(truth, dtype=np.float64)
    y = np.asarray(predicted, dtype=np.float64)
    _check_shapes(x, y)
    if x.ndim != 3:
        raise ValidationError(f"SAM expects (B, H, W), got {x.shape}")
    xf = x.reshape(x.shape[0], -1)
    yf = y.reshape(y.shape[0], -1)
    nx = np.linalg.norm(xf, axis=0)
    ny = np.linalg.norm(yf, axis=0)
    valid = (nx > 0) & (ny > 0)
    if not valid.any():
        raise ValidationError("all pixels have zero spectral norm")
    cosine = (xf[:, valid] * yf[:, valid]).sum(axis=0) / (nx[valid] * ny[valid])
    angles = np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0)))
    return float(angles.mean())


def rmse_metric(y: np.ndarray, y_hat: np.ndarray) -> float:
    return float(np.sqrt(mse_metric(y, y_hat)))


def r2_metric(y: np.ndarray, y_hat: np.ndarray) -> float:
    """Fraction of label variance explained; NaN when labels are constant."""
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    _check_shapes(y, y_hat)
    if y.size < 2:
        raise ValidationError("R^2 needs at least two samples")
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return float("nan")
    ss_res = float(((y - y_hat) ** 2).sum())
    return 1.0 - ss_res / ss_tot


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class ReconRecord:
    patch_id: str
    mae: float
    psnr_db: float
    ssim: float
    sam_deg: float


@dataclass(frozen=True)
class ReconReport:
    """Per-image reconstruction metrics plus their mean."""

    records: tuple[ReconRecord, ...]

    def __post_init__(self) -> None:
        if not self.records:
            raise ValidationError("report needs at least one record")
        object.__setattr__(self, "records", tuple(self.records))

    def aggregate(self) -> ReconRecord:
        return ReconRecord(
            patch_id="AGGREGATE",
            mae=float(np.mean([r.mae for r in self.records])),
            psnr_db=float(np.mean([r.psnr_db for r in self.records])),
            ssim=float(np.mean([r.ssim for r in self.records])),
            sam_deg=float(np.mean([r.sam_deg for r in self.records])),
        )


def score_cube(truth: np.ndarray, predicted: np.ndarray, patch_id: str) -> ReconRecord:
    return ReconRecord(
        patch_id=patch_id,
        mae=mae_metric(truth, predicted),
        psnr_db=psnr_metric(truth, predicted),
        ssim=ssim_metric(truth, predicted),
        sam_deg=sam_metric(truth, predicted),
    )


def evaluate_reconstruction(pairs: Sequence[tuple], band_subset: np.ndarray | None = None) -> ReconReport:
    """Score (truth_cube, predicted_cube) pairs, optionally on a band subset."""
    records = []
    for truth, predicted in pairs:
        t, p = truth.data, predicted.data
        if band_subset is not None:
            t, p = t[band_subset], p[band_subset]
        records.append(score_cube(t, p, truth.patch_id))
    return ReconReport(records=tuple(records))


def save_recon_report(report: ReconReport, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RECON_COLUMNS)
        for rec in list(report.records) + [report.aggregate()]:
            writer.writerow([rec.patch_id, repr(float(rec.mae)), repr(float(rec.psnr_db)),
                             repr(float(rec.ssim)), repr(float(rec.sam_deg))])


def load_recon_report(path: str | Path) -> ReconReport:
    path = Path(path)
    records = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != RECON_COLUMNS:
            missing = sorted(set(RECON_COLUMNS) - set(header or []))
            raise ValidationError(f"report CSV {path} missing columns: {missing}")
        for row in reader:
            if not row or row[0] == "AGGREGATE":
                continue
            records.append(ReconRecord(row[0], *(float(v) for v in row[1:])))
    return ReconReport(records=tuple(records))


@dataclass(frozen=True)
class RegressionReport:
    """Scalar regression metrics in the label's native units."""

    mae: float
    mse: float
    rmse: float
    r2: float

    @classmethod
    def from_predictions(cls, y: np.ndarray, y_hat: np.ndarray) -> "RegressionReport":
        return cls(
            mae=mae_metric(y, y_hat),
            mse=mse_metric(y, y_hat),
            rmse=rmse_metric(y, y_hat),
            r2=r2_metric(y, y_hat),
        )


def save_regression_report(report: RegressionReport, label: str, path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(REGRESSION_COLUMNS)
        writer.writerow([label, repr(float(report.mae)), repr(float(report.mse)),
                         repr(float(report.rmse)), repr(float(report.r2))])


def load_regression_report(path: str | Path) -> tuple[str, RegressionReport]:
    path = Path(path)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != REGRESSION_COLUMNS:
            missing = sorted(set(REGRESSION_COLUMNS) - set(header or []))
            raise ValidationError(f"regression CSV {path} missing columns: {missing}")
        row = next(reader, None)
        if row is None:
            raise ValidationError(f"regression CSV {path} has no data row")
    return row[0], RegressionReport(*(float(v) for v in row[1:]))
