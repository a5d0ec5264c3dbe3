"""Desk-scale simulator for federated learning with entangled uploads."""

from .config import ExperimentConfig, load_config, parse_config
from .runner import run_experiment, run_inversion_study

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "run_experiment",
    "run_inversion_study",
    "__version__",
]
