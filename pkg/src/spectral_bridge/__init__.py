"""Hyperspectral-from-multispectral reconstruction with downstream gas regression.

Pipeline stages: synthetic data generation, band statistics, SRF-based
spectral degradation, masked-autoencoder pretraining, cross-band fine-tuning,
reconstruction, metric evaluation, and gas regression, all driven by the
``spectral-bridge`` CLI.
"""

__version__ = "0.1.0"

from .bands import BandSpec
from .cube import HyperCube, load_cube, save_cube
from .errors import SpectralBridgeError, TrainingDivergedError, ValidationError
from .labels import GasLabelSet, load_labels
from .splits import SplitAssignment, make_splits
from .srf import SRFTable, load_srf
from .stats import BandStats, GlobalStats, SpectralSignature

__all__ = [
    "BandSpec",
    "BandStats",
    "GasLabelSet",
    "GlobalStats",
    "HyperCube",
    "SRFTable",
    "SpectralBridgeError",
    "SpectralSignature",
    "SplitAssignment",
    "TrainingDivergedError",
    "ValidationError",
    "load_cube",
    "load_labels",
    "load_srf",
    "make_splits",
    "save_cube",
]
