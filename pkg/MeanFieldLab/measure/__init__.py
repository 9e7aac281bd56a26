"""Empirical measures, moments, sub-Gaussian norms and W2 distances."""

from .codec import (
	read_ensemble_binary,
	read_ensemble_csv,
	write_ensemble_binary,
	write_ensemble_csv,
)
from .ensemble import (
	PSI2_POINT_MASS,
	Ensemble,
	InitSpec,
	InvalidEnsemble,
	Particle,
	psi2_norm,
	pushforward,
	pushforward_psi2_bound,
	replicate,
	sample_ensemble,
	second_moment,
)
from .format_registry import CURRENT_ENSEMBLE_FORMAT, UnsupportedEnsembleFormat
from .transport import W2_EXACT_CAP, ExactSizeExceeded, w2, w2_bruteforce, w2_exact, w2_sliced

__all__ = [
	"CURRENT_ENSEMBLE_FORMAT",
	"Ensemble",
	"ExactSizeExceeded",
	"InitSpec",
	"InvalidEnsemble",
	"PSI2_POINT_MASS",
	"Particle",
	"UnsupportedEnsembleFormat",
	"W2_EXACT_CAP",
	"psi2_norm",
	"pushforward",
	"pushforward_psi2_bound",
	"read_ensemble_binary",
	"read_ensemble_csv",
	"replicate",
	"sample_ensemble",
	"second_moment",
	"w2",
	"w2_bruteforce",
	"w2_exact",
	"w2_sliced",
	"write_ensemble_binary",
	"write_ensemble_csv",
]
