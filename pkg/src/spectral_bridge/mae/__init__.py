"""Spectral transformer masked autoencoder: tokens, model, training, checkpoints."""

from .checkpoint import ModelCheckpoint, load_checkpoint, save_checkpoint
from .model import ModelConfig, TokenGeometry, build_geometry, init_params
from .training import TrainResult, finetune, predict_masked, pretrain, reconstruct

__all__ = [
    "ModelCheckpoint",
    "ModelConfig",
    "TokenGeometry",
    "TrainResult",
    "build_geometry",
    "finetune",
    "init_params",
    "load_checkpoint",
    "predict_masked",
    "pretrain",
    "reconstruct",
    "save_checkpoint",
]
