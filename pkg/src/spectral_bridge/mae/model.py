"""Spectral transformer masked autoencoder.

Attention runs among the spectral tokens of one spatial position; the encoder
sees only visible groups, the decoder sees the full grid with mask tokens in
the hidden slots. Two input arms share the trunk: the hyperspectral arm embeds
b*p*p patches, the multispectral arm embeds p*p patches of single bands.
All forward functions return a cache consumed by the matching backward, which
fills a name -> gradient dict.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..bands import BandSpec
from ..errors import ValidationError
from ..nn import layers
from . import tokens as tk


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and training schedule of the spectral autoencoder."""

    embed_dim: int = 64
    band_group_size: int = 1
    spatial_patch: int = 4
    encoder_layers: int = 4
    decoder_layers: int = 2
    attention_heads: int = 4
    mask_fraction: float = 0.8
    n_spatial: int | None = None  # wavelength-scaling constant; None -> grid height
    learning_rate: float = 1e-3
    batch_size: int = 8
    steps: int = 200
    seed: int = 0
    loss_on_masked_only: bool = False
    mlp_ratio: int = 4
    eval_every: int = 50

    def __post_init__(self) -> None:
        d, heads = self.embed_dim, self.attention_heads
        for name in ("embed_dim", "band_group_size", "spatial_patch", "encoder_layers",
                     "decoder_layers", "attention_heads", "batch_size", "mlp_ratio",
                     "eval_every"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.steps < 0:
            raise ValidationError("steps must be >= 0")
        if d % (2 * heads) != 0:
            raise ValidationError(f"embed_dim {d} must be divisible by 2*heads ({2 * heads})")
        if d % 4 != 0:
            raise ValidationError(f"embed_dim {d} must be divisible by 4 for the 2-D encoding")
        if not 0.0 <= self.mask_fraction < 1.0:
            raise ValidationError(f"mask_fraction must be in [0, 1), got {self.mask_fraction}")
        if self.n_spatial is not None and self.n_spatial < 1:
            raise ValidationError("n_spatial must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")

    @property
    def hs_patch_len(self) -> int:
        return self.band_group_size * self.spatial_patch**2

    @property
    def ms_patch_len(self) -> int:
        return self.spatial_patch**2

    def resolved(self, height: int) -> "ModelConfig":
        """Fix n_spatial to the patch-grid height when left unset."""
        if self.n_spatial is not None:
            return self
        return replace(self, n_spatial=height // self.spatial_patch)


@dataclass(frozen=True)
class TokenGeometry:
    """Static per-dataset token layout and positional encodings."""

    band_group: int
    patch: int
    n_bands: int
    height: int
    width: int
    lambdas: np.ndarray  # (G,) group center wavelengths
    pos: np.ndarray      # (P, G, d) positional encodings, model dtype

    @property
    def n_groups(self) -> int:
        return self.lambdas.shape[0]

    @property
    def n_positions(self) -> int:
        return self.pos.shape[0]


def build_geometry(bands: Sequence[BandSpec], height: int, width: int, band_group: int,
                   cfg: ModelConfig, dtype=np.float32) -> TokenGeometry:
    """Token layout for cubes of the given band structure and spatial size."""
    if cfg.n_spatial is None:
        raise ValidationError("config n_spatial must be resolved before building geometry")
    p = cfg.spatial_patch
    n_bands = len(bands)
    tk.check_divisible(n_bands, band_group, "band grouping")
    tk.check_divisible(height, p, "patch height")
    tk.check_divisible(width, p, "patch width")
    lambdas = tk.group_centers(bands, band_group)
    xs, ys = tk.grid_coordinates(height // p, width // p)
    pos = tk.positional_grid(xs, ys, lambdas, cfg.embed_dim, cfg.n_spatial)
    return TokenGeometry(
        band_group=band_group, patch=p, n_bands=n_bands, height=height, width=width,
        lambdas=lambdas, pos=pos.astype(dtype),
    )


def init_params(cfg: ModelConfig, rng: np.random.Generator, dtype=np.float32) -> dict:
    """Fresh parameter dict; rng consumption order is fixed."""
    params: dict[str, np.ndarray] = {}
    layers.init_linear(params, rng, "embed_hs", cfg.hs_patch_len, cfg.embed_dim, dtype=dtype)
    layers.init_linear(params, rng, "embed_ms", cfg.ms_patch_len, cfg.embed_dim, dtype=dtype)
    params["mask_token"] = rng.normal(0.0, layers.INIT_STD, cfg.embed_dim).astype(dtype)
    layers.init_stack(params, rng, "enc", cfg.encoder_layers, cfg.embed_dim,
                      mlp_ratio=cfg.mlp_ratio, dtype=dtype)
    layers.init_stack(params, rng, "dec", cfg.decoder_layers, cfg.embed_dim,
                      mlp_ratio=cfg.mlp_ratio, dtype=dtype)
    layers.init_linear(params, rng, "head", cfg.embed_dim, cfg.hs_patch_len, dtype=dtype)
    return params


def visible_indices(mask_idx: np.ndarray, n_groups: int) -> np.ndarray:
    """Per-sample complement of the masked group indices, sorted."""
    n, m = mask_idx.shape
    flags = np.ones((n, n_groups), dtype=bool)
    if m:
        np.put_along_axis(flags, mask_idx, False, axis=1)
    vis = np.nonzero(flags)[1].reshape(n, n_groups - m)
    return vis.astype(np.int64)


def _gather_groups(arr: np.ndarray, idx: np.ndarray) -> np.ndarray:
    # arr (N, P, G, d), idx (N, K) -> (N, P, K, d)
    return np.take_along_axis(arr, idx[:, None, :, None], axis=2)


def _scatter_groups(arr: np.ndarray, idx: np.ndarray, values: np.ndarray) -> None:
    np.put_along_axis(arr, idx[:, None, :, None], values, axis=2)


def forward_pretrain(params: dict, batch: np.ndarray, mask_idx: np.ndarray,
                     geom: TokenGeometry, cfg: ModelConfig):
    """Masked band-wise autoencoding pass over normalized cubes.

    batch: (N, B, H, W); mask_idx: (N, m) masked group indices per sample.
    Returns (predicted cubes, cache).
    """
    n = batch.shape[0]
    n_groups, n_pos, d = geom.n_groups, geom.n_positions, cfg.embed_dim
    patches = tk.patchify_batch(batch, geom.band_group, geom.patch)
    emb, c_embed = layers.linear_forward(patches, params, "embed_hs")
    z0 = emb + geom.pos[None]

    vis_idx = visible_indices(mask_idx, n_groups)
    visible = _gather_groups(z0, vis_idx)
    enc_out, c_enc = layers.stack_forward(
        visible.reshape(n * n_pos, vis_idx.shape[1], d), params, "enc",
        cfg.encoder_layers, cfg.attention_heads,
    )

    full = np.ascontiguousarray(
        np.broadcast_to(params["mask_token"], (n, n_pos, n_groups, d)) + geom.pos[None]
    )
    _scatter_groups(full, vis_idx, enc_out.reshape(visible.shape))

    dec_out, c_dec = layers.stack_forward(
        full.reshape(n * n_pos, n_groups, d), params, "dec",
        cfg.decoder_layers, cfg.attention_heads,
    )
    pred_tokens, c_head = layers.linear_forward(dec_out, params, "head")
    preds = tk.depatchify_batch(
        pred_tokens.reshape(n, n_pos, n_groups, cfg.hs_patch_len),
        geom.band_group, geom.patch, geom.height, geom.width,
    )
    cache = (c_embed, c_enc, c_dec, c_head, vis_idx, mask_idx, batch.shape)
    return preds, cache


def backward_pretrain(dpreds: np.ndarray, cache, params: dict, grads: dict,
                      geom: TokenGeometry, cfg: ModelConfig) -> None:
    c_embed, c_enc, c_dec, c_head, vis_idx, mask_idx, shape = cache
    n = shape[0]
    n_groups, n_pos, d = geom.n_groups, geom.n_positions, cfg.embed_dim

    d_tokens = tk.patchify_batch(dpreds, geom.band_group, geom.patch)
    d_dec_out = layers.linear_backward(
        d_tokens.reshape(n * n_pos, n_groups, cfg.hs_patch_len), c_head, params, grads, "head"
    )
    d_full = layers.stack_backward(d_dec_out, c_dec, params, grads, "dec")
    d_full = d_full.reshape(n, n_pos, n_groups, d)

    if mask_idx.shape[1]:
        d_masked = _gather_groups(d_full, mask_idx)
        layers.add_grad(grads, "mask_token", d_masked.sum(axis=(0, 1, 2)))

    d_enc_out = _gather_groups(d_full, vis_idx)
    d_visible = layers.stack_backward(
        d_enc_out.reshape(n * n_pos, vis_idx.shape[1], d), c_enc, params, grads, "enc"
    )
    d_z0 = np.zeros((n, n_pos, n_groups, d), dtype=dpreds.dtype)
    _scatter_groups(d_z0, vis_idx, d_visible.reshape(d_enc_out.shape))
    layers.linear_backward(d_z0, c_embed, params, grads, "embed_hs")


def forward_crossband(params: dict, ms_batch: np.ndarray, geom_ms: TokenGeometry,
                      geom_hs: TokenGeometry, cfg: ModelConfig):
    """Hyperspectral prediction from multispectral input.

    Encoded multispectral tokens and mask-token queries at every hyperspectral
    group's coordinates share the decoder; the head reads the query outputs.
    """
    n = ms_batch.shape[0]
    n_pos, d = geom_ms.n_positions, cfg.embed_dim
    g_ms, g_hs = geom_ms.n_groups, geom_hs.n_groups
    patches = tk.patchify_batch(ms_batch, 1, geom_ms.patch)
    emb, c_embed = layers.linear_forward(patches, params, "embed_ms")
    z0 = emb + geom_ms.pos[None]

    enc_out, c_enc = layers.stack_forward(
        z0.reshape(n * n_pos, g_ms, d), params, "enc", cfg.encoder_layers, cfg.attention_heads
    )
    queries = np.broadcast_to(params["mask_token"], (n, n_pos, g_hs, d)) + geom_hs.pos[None]
    dec_in = np.concatenate([enc_out.reshape(n, n_pos, g_ms, d), queries], axis=2)

    dec_out, c_dec = layers.stack_forward(
        dec_in.reshape(n * n_pos, g_ms + g_hs, d), params, "dec",
        cfg.decoder_layers, cfg.attention_heads,
    )
    hs_tokens = dec_out.reshape(n, n_pos, g_ms + g_hs, d)[:, :, g_ms:, :]
    pred_tokens, c_head = layers.linear_forward(hs_tokens, params, "head")
    preds = tk.depatchify_batch(
        pred_tokens, geom_hs.band_group, geom_hs.patch, geom_hs.height, geom_hs.width
    )
    cache = (c_embed, c_enc, c_dec, c_head, ms_batch.shape)
    return preds, cache


def backward_crossband(dpreds: np.ndarray, cache, params: dict, grads: dict,
                       geom_ms: TokenGeometry, geom_hs: TokenGeometry, cfg: ModelConfig) -> None:
    c_embed, c_enc, c_dec, c_head, shape = cache
    n = shape[0]
    n_pos, d = geom_ms.n_positions, cfg.embed_dim
    g_ms, g_hs = geom_ms.n_groups, geom_hs.n_groups

    d_tokens = tk.patchify_batch(dpreds, geom_hs.band_group, geom_hs.patch)
    d_hs_tokens = layers.linear_backward(d_tokens, c_head, params, grads, "head")
    d_dec_out = np.zeros((n, n_pos, g_ms + g_hs, d), dtype=dpreds.dtype)
    d_dec_out[:, :, g_ms:, :] = d_hs_tokens

    d_dec_in = layers.stack_backward(
        d_dec_out.reshape(n * n_pos, g_ms + g_hs, d), c_dec, params, grads, "dec"
    )
    d_dec_in = d_dec_in.reshape(n, n_pos, g_ms + g_hs, d)
    layers.add_grad(grads, "mask_token", d_dec_in[:, :, g_ms:, :].sum(axis=(0, 1, 2)))

    d_z0 = layers.stack_backward(
        np.ascontiguousarray(d_dec_in[:, :, :g_ms, :].reshape(n * n_pos, g_ms, d)),
        c_enc, params, grads, "enc",
    )
    layers.linear_backward(d_z0.reshape(n, n_pos, g_ms, -1), c_embed, params, grads, "embed_ms")


def mask_to_band_weight(mask_idx: np.ndarray, n_groups: int, band_group: int,
                        shape: tuple) -> np.ndarray:
    """Boolean (N, B, 1, 1) selector of the bands in masked groups."""
    n, n_bands = shape[0], shape[1]
    flags = np.zeros((n, n_groups), dtype=bool)
    if mask_idx.shape[1]:
        np.put_along_axis(flags, mask_idx, True, axis=1)
    bands = np.repeat(flags, band_group, axis=1)
    return bands[:, :, None, None]


def mae_loss_and_grad(preds: np.ndarray, targets: np.ndarray,
                      element_mask: np.ndarray | None = None):
    """Mean absolute error plus its (sub)gradient with respect to preds."""
    diff = preds - targets
    if element_mask is None:
        loss = float(np.abs(diff).mean())
        grad = np.sign(diff) / diff.size
    else:
        selected = np.broadcast_to(element_mask, diff.shape)
        count = int(selected.sum())
        if count == 0:
            raise ValidationError("masked-only loss with an empty mask")
        loss = float(np.abs(np.where(selected, diff, 0.0)).sum() / count)
        grad = np.where(selected, np.sign(diff), 0.0) / count
    return loss, grad.astype(preds.dtype, copy=False)


def pretrain_loss_and_grads(params: dict, batch: np.ndarray, mask_idx: np.ndarray,
                            geom: TokenGeometry, cfg: ModelConfig):
    """One full forward/backward of the masked autoencoding objective."""
    preds, cache = forward_pretrain(params, batch, mask_idx, geom, cfg)
    element_mask = None
    if cfg.loss_on_masked_only:
        element_mask = mask_to_band_weight(mask_idx, geom.n_groups, geom.band_group, batch.shape)
    loss, dpreds = mae_loss_and_grad(preds, batch, element_mask)
    grads: dict[str, np.ndarray] = {}
    backward_pretrain(dpreds, cache, params, grads, geom, cfg)
    return loss, grads


def crossband_loss_and_grads(params: dict, ms_batch: np.ndarray, hs_batch: np.ndarray,
                             geom_ms: TokenGeometry, geom_hs: TokenGeometry, cfg: ModelConfig):
    """One full forward/backward of the multispectral-to-hyperspectral objective."""
    preds, cache = forward_crossband(params, ms_batch, geom_ms, geom_hs, cfg)
    loss, dpreds = mae_loss_and_grad(preds, hs_batch)
    grads: dict[str, np.ndarray] = {}
    backward_crossband(dpreds, cache, params, grads, geom_ms, geom_hs, cfg)
    return loss, grads
