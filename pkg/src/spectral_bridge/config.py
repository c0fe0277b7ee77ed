"""Flat INI-style experiment configuration.

Sections hold the knobs of one stage (plus [data] for shared paths); unknown
sections or keys are rejected so typos fail loudly. Values are plain strings
parsed on access.
"""

from __future__ import annotations

import configparser
import hashlib
from pathlib import Path

from .errors import ValidationError

SECTIONS: dict[str, set[str]] = {
    "data": {
        "hs_dir", "ms_dir", "recon_dir", "splits", "stats", "ms_stats", "labels",
        "srf", "checkpoint", "regressor", "manifest",
    },
    "synth": {
        "scenes", "bands", "height", "width", "endmembers", "blobs", "blob_scale",
        "spline_knots", "noise_std", "raw_scale", "lines", "patches_per_tile", "seed",
        "label_gas", "label_line", "label_noise", "sensor", "split_mode", "split_ratios",
        "split_seed", "shared_spectra", "wavelength_lo", "wavelength_hi",
    },
    "mae": {
        "embed_dim", "band_group_size", "spatial_patch", "encoder_layers",
        "decoder_layers", "attention_heads", "mask_fraction", "n_spatial",
        "learning_rate", "batch_size", "steps", "seed", "loss_on_masked_only",
        "mlp_ratio", "eval_every",
    },
    "finetune": {"steps", "learning_rate", "batch_size", "seed", "eval_every", "init"},
    "evaluate": {"mode", "method", "mask_fraction", "mask_seed", "split", "metrics_on"},
    "regressor": {
        "hidden", "learning_rate", "steps", "batch_size", "seed", "gas",
        "eval_every", "patience", "signatures", "label", "split",
    },
    "sweep": {"fractions", "seeds", "steps", "learning_rate", "batch_size", "eval_every"},
    "report": {"reconstruction", "regression"},
}


class ExperimentConfig:
    """Typed access to one parsed config file."""

    def __init__(self, parser: configparser.ConfigParser, path: Path | None, sha256: str):
        self._parser = parser
        self.path = path
        self.sha256 = sha256

    def has(self, section: str, key: str) -> bool:
        return self._parser.has_option(section, key) and self._parser.get(section, key).strip() != ""

    def _raw(self, section: str, key: str, default):
        if not self.has(section, key):
            if default is _REQUIRED:
                raise ValidationError(f"config is missing required key [{section}] {key}")
            return None
        return self._parser.get(section, key).strip()

    def get_str(self, section: str, key: str, default=None) -> str | None:
        raw = self._raw(section, key, default)
        return default if raw is None else raw

    def get_path(self, section: str, key: str, default=None) -> Path | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default if default is not None else None
        path = Path(raw)
        if not path.is_absolute() and self.path is not None:
            path = self.path.parent / path
        return path

    def get_int(self, section: str, key: str, default=None) -> int | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError as exc:
            raise ValidationError(f"[{section}] {key} must be an integer, got {raw!r}") from exc

    def get_float(self, section: str, key: str, default=None) -> float | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError as exc:
            raise ValidationError(f"[{section}] {key} must be a number, got {raw!r}") from exc

    def get_bool(self, section: str, key: str, default=None) -> bool | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ValidationError(f"[{section}] {key} must be a boolean, got {raw!r}")

    def get_floats(self, section: str, key: str, default=None) -> list[float] | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        return [float(v) for v in raw.split()]

    def get_ints(self, section: str, key: str, default=None) -> list[int] | None:
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        return [int(v) for v in raw.split()]

    def get_pairs(self, section: str, key: str, default=None) -> list[tuple[str, str]] | None:
        """key = label:value entries separated by whitespace."""
        raw = self._raw(section, key, default)
        if raw is None:
            return default
        pairs = []
        for item in raw.split():
            if "=" not in item:
                raise ValidationError(f"[{section}] {key}: expected label=value, got {item!r}")
            label, value = item.split("=", 1)
            pairs.append((label, value))
        return pairs


class _Required:
    pass


_REQUIRED = _Required()
REQUIRED = _REQUIRED


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    text = path.read_text()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ValidationError(f"malformed config {path}: {exc}") from exc
    for section in parser.sections():
        if section not in SECTIONS:
            raise ValidationError(f"unknown config section [{section}]")
        unknown = set(parser.options(section)) - SECTIONS[section]
        if unknown:
            raise ValidationError(f"unknown keys in [{section}]: {sorted(unknown)}")
    sha = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return ExperimentConfig(parser, path, sha)
