"""Pretraining, fine-tuning, and inference entry points.

Runs are deterministic per seed: the root seed spawns child streams for
parameter init, batch order, and mask sampling, in that order. Validation
masks are drawn once and reused at every evaluation so the early-stopping
signal is comparable across steps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..cube import HyperCube, stack_cubes
from ..errors import TrainingDivergedError, ValidationError
from ..nn import Adam
from ..stats import BandStats, denormalize_bandwise, normalize_bandwise, stats_over_cubes
from . import model as mdl
from . import tokens as tk
from .checkpoint import ModelCheckpoint
from .model import ModelConfig, TokenGeometry


@dataclass
class TrainResult:
    final: ModelCheckpoint
    best: ModelCheckpoint
    history: list[tuple[int, str, float]]

    def write_log(self, path: str | Path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "split", "loss"])
            for step, split, loss in self.history:
                writer.writerow([step, split, repr(loss)])


def _normalized_stack(cubes: Sequence[HyperCube], stats: BandStats) -> np.ndarray:
    return stack_cubes([normalize_bandwise(c, stats) for c in cubes])


def _snapshot(params: dict) -> dict:
    return {k: v.copy() for k, v in params.items()}


def _spawn_rngs(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def _draw_masks(rng: np.random.Generator, n: int, n_groups: int, fraction: float) -> np.ndarray:
    count = int(np.floor(fraction * n_groups))
    masks = np.empty((n, count), dtype=np.int64)
    for i in range(n):
        masks[i] = tk.sample_band_mask(n_groups, fraction, rng)
    return masks


def pretrain(train_cubes: Sequence[HyperCube], cfg: ModelConfig,
             val_cubes: Sequence[HyperCube] = (), stats: BandStats | None = None) -> TrainResult:
    """Self-supervised masked-band pretraining on hyperspectral cubes.

    Statistics are computed over the training cubes (unless given) and frozen
    into the checkpoint for later stages.
    """
    if not train_cubes:
        raise ValidationError("pretraining needs at least one training cube")
    first = train_cubes[0]
    if stats is None:
        stats = stats_over_cubes(train_cubes)
    cfg = cfg.resolved(first.height)
    geom = mdl.build_geometry(first.bands, first.height, first.width,
                              cfg.band_group_size, cfg)

    init_rng, order_rng, mask_rng, val_mask_rng = _spawn_rngs(cfg.seed, 4)
    params = mdl.init_params(cfg, init_rng)

    data = _normalized_stack(train_cubes, stats)
    val_data = _normalized_stack(val_cubes, stats) if val_cubes else None
    val_masks = (
        _draw_masks(val_mask_rng, len(val_cubes), geom.n_groups, cfg.mask_fraction)
        if val_cubes else None
    )

    def make_ckpt(p: dict, stage: str = "pretrained") -> ModelCheckpoint:
        return ModelCheckpoint(config=cfg, stage=stage, params=_snapshot(p),
                               hs_bands=first.bands, hs_stats=stats)

    optimizer = Adam(params, lr=cfg.learning_rate, total_steps=max(cfg.steps, 1))
    history: list[tuple[int, str, float]] = []
    best_val = np.inf
    best_params = _snapshot(params)

    for step in range(1, cfg.steps + 1):
        idx = order_rng.integers(0, data.shape[0], size=cfg.batch_size)
        batch = data[idx]
        masks = _draw_masks(mask_rng, cfg.batch_size, geom.n_groups, cfg.mask_fraction)
        loss, grads = mdl.pretrain_loss_and_grads(params, batch, masks, geom, cfg)
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        optimizer.step(params, grads)
        history.append((step, "train", loss))

        if val_data is not None and (step % cfg.eval_every == 0 or step == cfg.steps):
            preds, _ = mdl.forward_pretrain(params, val_data, val_masks, geom, cfg)
            val_loss, _ = mdl.mae_loss_and_grad(preds, val_data)
            history.append((step, "val", val_loss))
            if val_loss < best_val:
                best_val = val_loss
                best_params = _snapshot(params)

    if val_data is None:
        best_params = _snapshot(params)
    return TrainResult(final=make_ckpt(params), best=make_ckpt(best_params), history=history)


def _check_pair_geometry(pairs: Sequence[tuple[HyperCube, HyperCube]]) -> None:
    for ms, hs in pairs:
        if (ms.height, ms.width) != (hs.height, hs.width):
            raise ValidationError(
                f"pair {ms.patch_id!r}: spatial shapes differ "
                f"({ms.height}x{ms.width} vs {hs.height}x{hs.width})"
            )
        if ms.patch_id != hs.patch_id:
            raise ValidationError(f"pair mismatch: {ms.patch_id!r} vs {hs.patch_id!r}")


def finetune(train_pairs: Sequence[tuple[HyperCube, HyperCube]], cfg: ModelConfig,
             init: ModelCheckpoint | None = None,
             val_pairs: Sequence[tuple[HyperCube, HyperCube]] = ()) -> TrainResult:
    """Fine-tune to predict hyperspectral cubes from multispectral inputs.

    ``init=None`` trains from random initialization; otherwise the checkpoint
    parameters (and its frozen hyperspectral statistics) carry over. With
    steps=0 the initial parameters are returned unchanged.
    """
    if not train_pairs:
        raise ValidationError("fine-tuning needs at least one training pair")
    _check_pair_geometry(train_pairs)
    _check_pair_geometry(val_pairs)
    ms0, hs0 = train_pairs[0]

    if init is not None:
        if init.config.embed_dim != cfg.embed_dim or init.config.spatial_patch != cfg.spatial_patch:
            raise ValidationError("init checkpoint embed_dim/spatial_patch differ from config")
        if (init.config.encoder_layers, init.config.decoder_layers, init.config.attention_heads,
                init.config.band_group_size, init.config.mlp_ratio) != (
                cfg.encoder_layers, cfg.decoder_layers, cfg.attention_heads,
                cfg.band_group_size, cfg.mlp_ratio):
            raise ValidationError("init checkpoint architecture differs from config")
        if init.hs_bands != hs0.bands:
            raise ValidationError("init checkpoint hyperspectral bands differ from training pairs")
        hs_stats = init.hs_stats
    else:
        hs_stats = stats_over_cubes([hs for _, hs in train_pairs])
    ms_stats = stats_over_cubes([ms for ms, _ in train_pairs])

    cfg = cfg.resolved(hs0.height)
    geom_hs = mdl.build_geometry(hs0.bands, hs0.height, hs0.width, cfg.band_group_size, cfg)
    geom_ms = mdl.build_geometry(ms0.bands, ms0.height, ms0.width, 1, cfg)

    init_rng, order_rng = _spawn_rngs(cfg.seed, 2)
    params = _snapshot(init.params) if init is not None else mdl.init_params(cfg, init_rng)

    ms_data = _normalized_stack([ms for ms, _ in train_pairs], ms_stats)
    hs_data = _normalized_stack([hs for _, hs in train_pairs], hs_stats)
    val_ms = _normalized_stack([ms for ms, _ in val_pairs], ms_stats) if val_pairs else None
    val_hs = _normalized_stack([hs for _, hs in val_pairs], hs_stats) if val_pairs else None

    def make_ckpt(p: dict) -> ModelCheckpoint:
        return ModelCheckpoint(config=cfg, stage="finetuned", params=_snapshot(p),
                               hs_bands=hs0.bands, hs_stats=hs_stats,
                               ms_bands=ms0.bands, ms_stats=ms_stats)

    optimizer = Adam(params, lr=cfg.learning_rate, total_steps=max(cfg.steps, 1))
    history: list[tuple[int, str, float]] = []
    best_val = np.inf
    best_params = _snapshot(params)

    for step in range(1, cfg.steps + 1):
        idx = order_rng.integers(0, ms_data.shape[0], size=cfg.batch_size)
        loss, grads = mdl.crossband_loss_and_grads(
            params, ms_data[idx], hs_data[idx], geom_ms, geom_hs, cfg
        )
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        optimizer.step(params, grads)
        history.append((step, "train", loss))

        if val_ms is not None and (step % cfg.eval_every == 0 or step == cfg.steps):
            preds, _ = mdl.forward_crossband(params, val_ms, geom_ms, geom_hs, cfg)
            val_loss, _ = mdl.mae_loss_and_grad(preds, val_hs)
            history.append((step, "val", val_loss))
            if val_loss < best_val:
                best_val = val_loss
                best_params = _snapshot(params)

    if val_ms is None:
        best_params = _snapshot(params)
    return TrainResult(final=make_ckpt(params), best=make_ckpt(best_params), history=history)


def _check_bands(cube_bands, ckpt_bands, what: str) -> None:
    if len(cube_bands) != len(ckpt_bands):
        raise ValidationError(f"{what}: cube has {len(cube_bands)} bands, "
                              f"checkpoint expects {len(ckpt_bands)}")
    for i, (a, b) in enumerate(zip(cube_bands, ckpt_bands)):
        if abs(a.center_nm - b.center_nm) > 0.01:
            raise ValidationError(f"{what}: band {i} center differs from checkpoint")


def reconstruct(ms_cube: HyperCube, ckpt: ModelCheckpoint) -> HyperCube:
    """Full hyperspectral reconstruction from one multispectral cube."""
    if ckpt.stage != "finetuned":
        raise ValidationError(f"reconstruct requires a finetuned checkpoint, got {ckpt.stage!r}")
    _check_bands(ms_cube.bands, ckpt.ms_bands, "multispectral input")
    cfg = ckpt.config
    geom_hs = mdl.build_geometry(ckpt.hs_bands, ms_cube.height, ms_cube.width,
                                 cfg.band_group_size, cfg)
    geom_ms = mdl.build_geometry(ms_cube.bands, ms_cube.height, ms_cube.width, 1, cfg)
    normalized = normalize_bandwise(ms_cube, ckpt.ms_stats)
    preds, _ = mdl.forward_crossband(
        ckpt.params, normalized.data[None].astype(np.float32), geom_ms, geom_hs, cfg
    )
    predicted = HyperCube(data=preds[0], bands=ckpt.hs_bands,
                          patch_id=ms_cube.patch_id, tile_id=ms_cube.tile_id)
    return denormalize_bandwise(predicted, ckpt.hs_stats)


def predict_masked(cube: HyperCube, ckpt: ModelCheckpoint, mask_groups: np.ndarray) -> HyperCube:
    """Reconstruct a hyperspectral cube after masking the given spectral groups."""
    _check_bands(cube.bands, ckpt.hs_bands, "hyperspectral input")
    cfg = ckpt.config
    geom = mdl.build_geometry(cube.bands, cube.height, cube.width, cfg.band_group_size, cfg)
    mask_idx = np.asarray(mask_groups, dtype=np.int64).reshape(1, -1)
    if mask_idx.shape[1] and (mask_idx.min() < 0 or mask_idx.max() >= geom.n_groups):
        raise ValidationError("mask group index out of range")
    normalized = normalize_bandwise(cube, ckpt.hs_stats)
    preds, _ = mdl.forward_pretrain(
        ckpt.params, normalized.data[None].astype(np.float32), mask_idx, geom, cfg
    )
    predicted = cube.with_data(preds[0])
    return denormalize_bandwise(predicted, ckpt.hs_stats)
