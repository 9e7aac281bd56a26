"""MeanFieldLab: mean-field gradient-flow experiments with escape-set and large-scale-limit checks."""

__version__ = "0.1.0"

from .core import (
	EXPERIMENT_KINDS,
	ConfigError,
	ConfigManager,
	ExperimentConfig,
	NumericalDivergence,
	derive_seeds,
)
from .measure import Ensemble, InitSpec, sample_ensemble, w2

__all__ = [
	"ConfigError",
	"ConfigManager",
	"EXPERIMENT_KINDS",
	"Ensemble",
	"ExperimentConfig",
	"InitSpec",
	"NumericalDivergence",
	"__version__",
	"derive_seeds",
	"sample_ensemble",
	"w2",
]
