"""Tokenization geometry: patch extraction, positional encodings, band masking.

A cube is cut into groups of ``b`` adjacent bands by ``p`` x ``p`` spatial
patches. Tokens carry (x, y) patch-grid coordinates plus the group's mean
center wavelength; the positional encoding sums a 2-D spatial sinusoid (x
ladder in the first half of the vector, y ladder in the second) with a 1-D
spectral sinusoid over the scaled wavelength.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..bands import BandSpec, band_centers
from ..errors import ValidationError

WAVELENGTH_LO = 400.0
WAVELENGTH_HI = 2500.0


def check_divisible(value: int, divisor: int, what: str) -> None:
    if value % divisor != 0:
        raise ValidationError(f"{what}: {divisor} does not divide {value}")


def patchify_array(data: np.ndarray, b: int, p: int) -> np.ndarray:
    """(B, H, W) -> (G, Hp, Wp, b*p*p) with C-order flattening inside a patch."""
    n_bands, height, width = data.shape
    check_divisible(n_bands, b, "band grouping")
    check_divisible(height, p, "patch height")
    check_divisible(width, p, "patch width")
    g, hp, wp = n_bands // b, height // p, width // p
    tiled = data.reshape(g, b, hp, p, wp, p)
    return np.ascontiguousarray(tiled.transpose(0, 2, 4, 1, 3, 5).reshape(g, hp, wp, b * p * p))


def depatchify_array(patches: np.ndarray, b: int, p: int) -> np.ndarray:
    """Inverse of patchify_array."""
    g, hp, wp, length = patches.shape
    if length != b * p * p:
        raise ValidationError(f"patch length {length} != {b}*{p}*{p}")
    tiled = patches.reshape(g, hp, wp, b, p, p).transpose(0, 3, 1, 4, 2, 5)
    return np.ascontiguousarray(tiled.reshape(g * b, hp * p, wp * p))


def patchify_batch(batch: np.ndarray, b: int, p: int) -> np.ndarray:
    """(N, B, H, W) -> (N, P, G, L) token layout, positions ordered row-major."""
    n, n_bands, height, width = batch.shape
    check_divisible(n_bands, b, "band grouping")
    check_divisible(height, p, "patch height")
    check_divisible(width, p, "patch width")
    g, hp, wp = n_bands // b, height // p, width // p
    tiled = batch.reshape(n, g, b, hp, p, wp, p)
    tokens = tiled.transpose(0, 3, 5, 1, 2, 4, 6).reshape(n, hp * wp, g, b * p * p)
    return np.ascontiguousarray(tokens)


def depatchify_batch(tokens: np.ndarray, b: int, p: int, height: int, width: int) -> np.ndarray:
    """Inverse of patchify_batch back to (N, B, H, W)."""
    n, n_pos, g, length = tokens.shape
    hp, wp = height // p, width // p
    if n_pos != hp * wp or length != b * p * p:
        raise ValidationError("token layout does not match the target cube shape")
    tiled = tokens.reshape(n, hp, wp, g, b, p, p).transpose(0, 3, 4, 1, 5, 2, 6)
    return np.ascontiguousarray(tiled.reshape(n, g * b, height, width))


def group_centers(bands: Sequence[BandSpec], b: int) -> np.ndarray:
    """Mean center wavelength per group of ``b`` adjacent bands."""
    centers = band_centers(bands)
    check_divisible(centers.size, b, "band grouping")
    return centers.reshape(-1, b).mean(axis=1)


def scale_wavelength(lambda_nm, n_spatial: int):
    """Map [400, 2500] nm to [0, n_spatial] (unitless)."""
    lam = np.asarray(lambda_nm, dtype=np.float64)
    if np.any(lam < WAVELENGTH_LO) or np.any(lam > WAVELENGTH_HI):
        raise ValidationError(
            f"wavelength outside [{WAVELENGTH_LO:g}, {WAVELENGTH_HI:g}] nm"
        )
    scaled = (lam - WAVELENGTH_LO) / (WAVELENGTH_HI - WAVELENGTH_LO) * n_spatial
    return float(scaled) if np.isscalar(lambda_nm) else scaled


def sincos_encoding(pos, dim: int) -> np.ndarray:
    """Interleaved sin/cos ladder: out[..., 2i] = sin(pos/10000^(2i/dim))."""
    if dim % 2 != 0:
        raise ValidationError(f"encoding dim must be even, got {dim}")
    pos = np.atleast_1d(np.asarray(pos, dtype=np.float64))
    i = np.arange(dim // 2, dtype=np.float64)
    angle = pos[..., None] / np.power(10000.0, 2.0 * i / dim)
    out = np.empty(pos.shape + (dim,), dtype=np.float64)
    out[..., 0::2] = np.sin(angle)
    out[..., 1::2] = np.cos(angle)
    return out


def spatial_encoding(x, y, dim: int) -> np.ndarray:
    """2-D spatial encoding: x ladder in the first dim/2, y ladder in the rest."""
    if dim % 4 != 0:
        raise ValidationError(f"spatial encoding needs dim divisible by 4, got {dim}")
    half = dim // 2
    return np.concatenate([sincos_encoding(x, half), sincos_encoding(y, half)], axis=-1)


def spectral_encoding(lambda_nm, dim: int, n_spatial: int) -> np.ndarray:
    """1-D spectral encoding of the scaled center wavelength."""
    return sincos_encoding(scale_wavelength(lambda_nm, n_spatial), dim)


def positional_encoding(x: int, y: int, lambda_nm: float, dim: int, n_spatial: int) -> np.ndarray:
    """Element-wise sum of the spatial and spectral encodings for one token."""
    return (spatial_encoding(x, y, dim) + spectral_encoding(lambda_nm, dim, n_spatial))[0]


def positional_grid(xs: np.ndarray, ys: np.ndarray, lambdas_nm: np.ndarray, dim: int,
                    n_spatial: int) -> np.ndarray:
    """(P, G, d) encoding grid for all position x group combinations."""
    spatial = spatial_encoding(xs, ys, dim)            # (P, d)
    spectral = spectral_encoding(lambdas_nm, dim, n_spatial)  # (G, d)
    return spatial[:, None, :] + spectral[None, :, :]


def grid_coordinates(hp: int, wp: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major (x, y) coordinates matching patchify_batch position order."""
    ys, xs = np.divmod(np.arange(hp * wp), wp)
    return xs.astype(np.float64), ys.astype(np.float64)


def sample_band_mask(n_groups: int, mask_fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Choose floor(mask_fraction * n_groups) group indices without replacement."""
    if not 0.0 <= mask_fraction < 1.0:
        raise ValidationError(f"mask fraction must be in [0, 1), got {mask_fraction}")
    count = int(np.floor(mask_fraction * n_groups))
    return np.sort(rng.choice(n_groups, size=count, replace=False)).astype(np.int64)


@dataclass(frozen=True)
class TokenGrid:
    """Embedded tokens of one cube with coordinates and mask flags.

    ``tokens`` holds embedding + positional encoding; ``pos`` keeps the
    positional part so masking can substitute the mask token while retaining
    the encoding.
    """

    tokens: np.ndarray        # (P, G, d)
    pos: np.ndarray           # (P, G, d)
    xs: np.ndarray            # (P,)
    ys: np.ndarray            # (P,)
    lambda_centers: np.ndarray  # (G,)
    masked: np.ndarray        # (G,) bool

    def __post_init__(self) -> None:
        t = self.tokens
        if t.ndim != 3 or t.shape != self.pos.shape:
            raise ValidationError("tokens and pos must both be (P, G, d)")
        if self.xs.shape != (t.shape[0],) or self.ys.shape != (t.shape[0],):
            raise ValidationError("coordinate arrays must have one entry per position")
        if self.lambda_centers.shape != (t.shape[1],) or self.masked.shape != (t.shape[1],):
            raise ValidationError("per-group arrays must have one entry per spectral group")

    @property
    def n_tokens(self) -> int:
        return self.tokens.shape[0] * self.tokens.shape[1]


def apply_band_mask(grid: TokenGrid, mask_fraction: float, rng: np.random.Generator,
                    mask_token: np.ndarray) -> TokenGrid:
    """Replace whole spectral groups with the mask token (encoding retained).

    The same group set is masked at every spatial position.
    """
    masked_idx = sample_band_mask(grid.tokens.shape[1], mask_fraction, rng)
    tokens = grid.tokens.copy()
    tokens[:, masked_idx, :] = mask_token[None, None, :] + grid.pos[:, masked_idx, :]
    masked = np.zeros(grid.tokens.shape[1], dtype=bool)
    masked[masked_idx] = True
    return TokenGrid(
        tokens=tokens, pos=grid.pos, xs=grid.xs, ys=grid.ys,
        lambda_centers=grid.lambda_centers, masked=masked,
    )
