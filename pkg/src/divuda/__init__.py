"""Divergence-optimization training for noisy universal domain adaptation."""

from .backend import backend_name
from .divergence import variant_losses
from .model import Architecture, TwinModel
from .synthdata import NoiseSpec, ScenarioSpec, toy_scenario
from .trainer import Hyperparams, Trainer, toy_hyperparams, train

__all__ = [
    "Architecture", "Hyperparams", "NoiseSpec", "ScenarioSpec", "Trainer",
    "TwinModel", "backend_name", "toy_hyperparams", "toy_scenario", "train",
    "variant_losses",
]

__version__ = "0.1.0"
