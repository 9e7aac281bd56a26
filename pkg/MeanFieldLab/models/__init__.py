"""Model families Phi(w, theta) = phi(theta) w, datasets and the measure-to-predictor map."""

from .activations import ACTIVATIONS, Activation, get_activation
from .attention import (
	AttentionHead,
	alpha_coarea,
	attention_gradient,
	dpsi_attention,
	psi_attention,
	psi_hardmax,
)
from .base import ModelSpec
from .dataset import (
	Dataset,
	DatasetError,
	attention_contexts,
	dataset_from_config,
	gaussian_mixture,
	load_dataset_csv,
	save_dataset_csv,
	teacher_network,
)
from .predictor import fit_predictor_constant, l2_distance, predictor_bound_ratio, predictor_mean
from .registry import build_model, model_from_descriptor
from .sigmoid_net import SigmoidNet, sigmoid_phi
from .softmax import DEFAULT_TIE_TOL, argmax_set, d2softmax, dsoftmax, hardmax, softmax

__all__ = [
	"ACTIVATIONS",
	"Activation",
	"AttentionHead",
	"DEFAULT_TIE_TOL",
	"Dataset",
	"DatasetError",
	"ModelSpec",
	"SigmoidNet",
	"alpha_coarea",
	"argmax_set",
	"attention_contexts",
	"attention_gradient",
	"build_model",
	"d2softmax",
	"dataset_from_config",
	"dpsi_attention",
	"dsoftmax",
	"fit_predictor_constant",
	"gaussian_mixture",
	"get_activation",
	"hardmax",
	"l2_distance",
	"load_dataset_csv",
	"model_from_descriptor",
	"predictor_bound_ratio",
	"predictor_mean",
	"psi_attention",
	"psi_hardmax",
	"save_dataset_csv",
	"sigmoid_phi",
	"softmax",
	"teacher_network",
]
