"""Minimal neural-network plumbing: explicit forward/backward layers over
parameter dictionaries, plus the Adam optimizer."""

from .adam import Adam, cosine_lr
from . import layers

__all__ = ["Adam", "cosine_lr", "layers"]
