"""Model checkpoints in the SBCK1 container format.

Model parameters are stored as named little-endian float32 tensors exactly as
trained, so a reloaded model reproduces forward passes bit-exactly. Band
metadata and normalization statistics ride along as float64 tensors under the
``meta.`` prefix; the stage tag and model configuration live in the JSON
header.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..bands import BandSpec, band_centers, band_fwhms, bands_from_arrays
from ..container import read_container, write_container
from ..errors import ValidationError
from ..stats import BandStats
from .model import ModelConfig, init_params

MAGIC = "SBCK1"
STAGES = ("pretrained", "finetuned")


@dataclass(frozen=True)
class ModelCheckpoint:
    """All learnable parameters plus the configuration that shaped them."""

    config: ModelConfig
    stage: str
    params: dict[str, np.ndarray]
    hs_bands: tuple[BandSpec, ...]
    hs_stats: BandStats
    ms_bands: tuple[BandSpec, ...] | None = None
    ms_stats: BandStats | None = None

    def __post_init__(self) -> None:
        if self.stage not in STAGES:
            raise ValidationError(f"checkpoint stage must be one of {STAGES}, got {self.stage!r}")
        reference = init_params(self.config, np.random.default_rng(0))
        if set(reference) != set(self.params):
            diff = sorted(set(reference) ^ set(self.params))
            raise ValidationError(f"parameter names inconsistent with config: {diff}")
        for name, ref in reference.items():
            arr = self.params[name]
            if arr.shape != ref.shape:
                raise ValidationError(
                    f"parameter {name} has shape {arr.shape}, config implies {ref.shape}"
                )
            if arr.dtype != np.float32:
                raise ValidationError(f"parameter {name} must be float32 to serialize")
        if (self.ms_bands is None) != (self.ms_stats is None):
            raise ValidationError("multispectral bands and stats must be set together")


def _stats_tensors(prefix: str, bands, stats: BandStats) -> dict[str, np.ndarray]:
    return {
        f"meta.{prefix}_centers": band_centers(bands),
        f"meta.{prefix}_fwhm": band_fwhms(bands),
        f"meta.{prefix}_mean": np.asarray(stats.mean, dtype=np.float64),
        f"meta.{prefix}_std": np.asarray(stats.std, dtype=np.float64),
    }


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> None:
    tensors: dict[str, np.ndarray] = {f"param.{k}": v for k, v in ckpt.params.items()}
    tensors.update(_stats_tensors("hs", ckpt.hs_bands, ckpt.hs_stats))
    if ckpt.ms_bands is not None:
        tensors.update(_stats_tensors("ms", ckpt.ms_bands, ckpt.ms_stats))
    write_container(path, MAGIC, {"stage": ckpt.stage, "model": asdict(ckpt.config)}, tensors)


def _load_stats(tensors: dict[str, np.ndarray], prefix: str):
    keys = [f"meta.{prefix}_{part}" for part in ("centers", "fwhm", "mean", "std")]
    if not all(k in tensors for k in keys):
        return None, None
    centers, fwhm, mean, std = (tensors[k] for k in keys)
    bands = bands_from_arrays(centers, fwhm)
    stats = BandStats(count=1, mean=mean, m2=std**2, centers_nm=centers)
    return bands, stats


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    header, tensors = read_container(path, MAGIC)
    config = ModelConfig(**header["model"])
    params = {k[len("param."):]: v for k, v in tensors.items() if k.startswith("param.")}
    hs_bands, hs_stats = _load_stats(tensors, "hs")
    if hs_bands is None:
        raise ValidationError(f"checkpoint {path} is missing hyperspectral band metadata")
    ms_bands, ms_stats = _load_stats(tensors, "ms")
    return ModelCheckpoint(
        config=config, stage=header["stage"], params=params,
        hs_bands=hs_bands, hs_stats=hs_stats, ms_bands=ms_bands, ms_stats=ms_stats,
    )
