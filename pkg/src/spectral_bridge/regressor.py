"""Feedforward regressor from spectral signatures to a gas concentration.

Signatures are globally normalized (one scalar mean/std over all bands and
training samples of the representation at hand) and labels are z-scored for
training; reported predictions are back-transformed to native units. Training
minimizes MSE with Adam and early-stops on validation MSE.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .container import read_container, write_container
from .errors import TrainingDivergedError, ValidationError
from .labels import GAS_UNITS, GasLabelSet
from .metrics import RegressionReport
from .nn import Adam, layers
from .splits import SplitAssignment
from .stats import GlobalStats, SpectralSignature

MAGIC = "SBRG1"

SIGMA_FLOOR = 1e-12


@dataclass(frozen=True)
class RegressorConfig:
    """Architecture and schedule of the gas regressor."""

    input_bands: int
    hidden: tuple[int, ...] = (256, 256)
    learning_rate: float = 1e-3
    steps: int = 3000
    batch_size: int = 32
    seed: int = 0
    gas: str = "CH4"
    eval_every: int = 25
    patience: int = 20

    def __post_init__(self) -> None:
        if self.input_bands < 1:
            raise ValidationError("input_bands must be >= 1")
        hidden = tuple(int(h) for h in self.hidden)
        if not hidden or any(h < 1 for h in hidden):
            raise ValidationError("hidden layer sizes must be >= 1")
        if self.gas not in GAS_UNITS:
            raise ValidationError(f"unknown gas {self.gas!r}")
        if self.steps < 0 or self.batch_size < 1 or self.eval_every < 1 or self.patience < 1:
            raise ValidationError("invalid training schedule")
        object.__setattr__(self, "hidden", hidden)


@dataclass(frozen=True)
class RegressorCheckpoint:
    config: RegressorConfig
    params: dict[str, np.ndarray]
    feature_stats: GlobalStats
    label_mean: float
    label_std: float


def _init_params(cfg: RegressorConfig, rng: np.random.Generator) -> dict[str, np.ndarray]:
    params: dict[str, np.ndarray] = {}
    sizes = (cfg.input_bands,) + cfg.hidden + (1,)
    for i in range(len(sizes) - 1):
        std = float(np.sqrt(2.0 / sizes[i]))
        layers.init_linear(params, rng, f"fc{i}", sizes[i], sizes[i + 1],
                           dtype=np.float32, std=std)
    return params


def _forward(params: dict, x: np.ndarray, n_hidden: int):
    caches = []
    h = x
    for i in range(n_hidden):
        h, c_lin = layers.linear_forward(h, params, f"fc{i}")
        h, mask = layers.relu_forward(h)
        caches.append((c_lin, mask))
    out, c_last = layers.linear_forward(h, params, f"fc{n_hidden}")
    return out[:, 0], (caches, c_last)


def _backward(dout: np.ndarray, cache, params: dict, n_hidden: int) -> dict:
    caches, c_last = cache
    grads: dict[str, np.ndarray] = {}
    dh = layers.linear_backward(dout[:, None], c_last, params, grads, f"fc{n_hidden}")
    for i in reversed(range(n_hidden)):
        c_lin, mask = caches[i]
        dh = layers.relu_backward(dh, mask)
        dh = layers.linear_backward(dh, c_lin, params, grads, f"fc{i}")
    return grads


def predict(ckpt: RegressorCheckpoint, features: np.ndarray) -> np.ndarray:
    """Predict native-unit concentrations for raw (unnormalized) signatures."""
    x = ((features - ckpt.feature_stats.mean) / max(ckpt.feature_stats.std, SIGMA_FLOOR))
    z, _ = _forward(ckpt.params, x.astype(np.float32), len(ckpt.config.hidden))
    return z.astype(np.float64) * ckpt.label_std + ckpt.label_mean


def _signature_values(sig) -> np.ndarray:
    return sig.values if isinstance(sig, SpectralSignature) else np.asarray(sig, dtype=np.float64)


def _collect(signatures: Mapping[str, SpectralSignature], labels: GasLabelSet,
             ids: Sequence[str], cfg: RegressorConfig):
    feats, targets = [], []
    for patch_id in ids:
        values = _signature_values(signatures[patch_id])
        if values.shape[0] != cfg.input_bands:
            raise ValidationError(
                f"signature {patch_id!r} has {values.shape[0]} bands, "
                f"config expects {cfg.input_bands}"
            )
        if patch_id not in labels.values:
            raise ValidationError(f"missing label for patch {patch_id!r}")
        feats.append(values)
        targets.append(labels.values[patch_id])
    return np.stack(feats), np.array(targets, dtype=np.float64)


def train_regressor(signatures: Mapping[str, SpectralSignature], labels: GasLabelSet,
                    cfg: RegressorConfig, split: SplitAssignment) -> RegressorCheckpoint:
    """Fit the regressor on the train split, early-stopping on val MSE."""
    train_ids = [p for p in split.members("train") if p in signatures]
    val_ids = [p for p in split.members("val") if p in signatures]
    if not train_ids:
        raise ValidationError("no training signatures in the split")

    x_train, y_train = _collect(signatures, labels, train_ids, cfg)
    feature_stats = GlobalStats.from_values(x_train)
    label_mean = float(y_train.mean())
    label_std = max(float(y_train.std()), SIGMA_FLOOR)

    def prep(x: np.ndarray) -> np.ndarray:
        return ((x - feature_stats.mean) / max(feature_stats.std, SIGMA_FLOOR)).astype(np.float32)

    xt = prep(x_train)
    zt = ((y_train - label_mean) / label_std).astype(np.float32)
    if val_ids:
        x_val, y_val = _collect(signatures, labels, val_ids, cfg)
        xv, zv = prep(x_val), ((y_val - label_mean) / label_std).astype(np.float32)
    else:
        xv = zv = None

    rng_init, rng_order = (np.random.default_rng(s)
                           for s in np.random.SeedSequence(cfg.seed).spawn(2))
    params = _init_params(cfg, rng_init)
    optimizer = Adam(params, lr=cfg.learning_rate, total_steps=max(cfg.steps, 1))
    n_hidden = len(cfg.hidden)

    best_params = {k: v.copy() for k, v in params.items()}
    best_val = np.inf
    stale = 0

    for step in range(1, cfg.steps + 1):
        idx = rng_order.integers(0, xt.shape[0], size=cfg.batch_size)
        preds, cache = _forward(params, xt[idx], n_hidden)
        diff = preds - zt[idx]
        loss = float(np.mean(diff**2))
        if not np.isfinite(loss):
            raise TrainingDivergedError(step, loss)
        grads = _backward((2.0 / diff.size) * diff, cache, params, n_hidden)
        optimizer.step(params, grads)

        if xv is not None and (step % cfg.eval_every == 0 or step == cfg.steps):
            val_preds, _ = _forward(params, xv, n_hidden)
            val_mse = float(np.mean((val_preds - zv) ** 2))
            if val_mse < best_val - 1e-12:
                best_val = val_mse
                best_params = {k: v.copy() for k, v in params.items()}
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break

    if xv is None:
        best_params = {k: v.copy() for k, v in params.items()}
    return RegressorCheckpoint(config=cfg, params=best_params, feature_stats=feature_stats,
                               label_mean=label_mean, label_std=label_std)


def evaluate_regressor(ckpt: RegressorCheckpoint, signatures: Mapping[str, SpectralSignature],
                       labels: GasLabelSet, ids: Sequence[str] | None = None) -> RegressionReport:
    """Native-unit metrics over the given patch ids (default: all labeled)."""
    if ids is None:
        ids = sorted(p for p in signatures if p in labels.values)
    x, y = _collect(signatures, labels, list(ids), ckpt.config)
    y_hat = predict(ckpt, x)
    return RegressionReport.from_predictions(y, y_hat)


def save_regressor(ckpt: RegressorCheckpoint, path: str | Path) -> None:
    header = {
        "model": asdict(ckpt.config),
        "feature_mean": ckpt.feature_stats.mean,
        "feature_std": ckpt.feature_stats.std,
        "label_mean": ckpt.label_mean,
        "label_std": ckpt.label_std,
    }
    tensors = {f"param.{k}": v for k, v in ckpt.params.items()}
    write_container(path, MAGIC, header, tensors)


def load_regressor(path: str | Path) -> RegressorCheckpoint:
    header, tensors = read_container(path, MAGIC)
    model = dict(header["model"])
    model["hidden"] = tuple(model["hidden"])
    return RegressorCheckpoint(
        config=RegressorConfig(**model),
        params={k[len("param."):]: v for k, v in tensors.items() if k.startswith("param.")},
        feature_stats=GlobalStats(header["feature_mean"], header["feature_std"]),
        label_mean=header["label_mean"],
        label_std=header["label_std"],
    )


# ---------------------------------------------------------------------------
# signature CSV (patch_id,v1..vB)


def save_signatures(signatures: Mapping[str, SpectralSignature], path: str | Path) -> None:
    if not signatures:
        raise ValidationError("no signatures to save")
    n_bands = _signature_values(next(iter(signatures.values()))).shape[0]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["patch_id"] + [f"v{i + 1}" for i in range(n_bands)])
        for patch_id in sorted(signatures):
            values = _signature_values(signatures[patch_id])
            if values.shape[0] != n_bands:
                raise ValidationError("signatures have inconsistent band counts")
            writer.writerow([patch_id] + [repr(float(v)) for v in values])


def load_signature_values(path: str | Path) -> dict[str, np.ndarray]:
    """Signature vectors keyed by patch id (band metadata is not persisted)."""
    path = Path(path)
    out: dict[str, np.ndarray] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0] != "patch_id":
            raise ValidationError(f"signature CSV {path} must start with a patch_id column")
        width = len(header) - 1
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width + 1:
                raise ValidationError(f"{path}:{lineno}: expected {width + 1} columns")
            if row[0] in out:
                raise ValidationError(f"{path}:{lineno}: duplicate patch id {row[0]!r}")
            out[row[0]] = np.array([float(v) for v in row[1:]], dtype=np.float64)
    return out
