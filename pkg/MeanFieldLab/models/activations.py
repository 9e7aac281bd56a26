"""Scalar activations with first and second derivatives, evaluated elementwise."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np
from scipy.special import expit, ndtr

ArrayFn = Callable[[np.ndarray], np.ndarray]

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Activation:
	name: str
	value: ArrayFn
	d1: ArrayFn
	d2: ArrayFn
	# sup |sigma|; None when sigma grows linearly.
	bound: float | None


def _sigmoid_d1(x: np.ndarray) -> np.ndarray:
	s = expit(x)
	return s * (1.0 - s)


def _sigmoid_d2(x: np.ndarray) -> np.ndarray:
	s = expit(x)
	return s * (1.0 - s) * (1.0 - 2.0 * s)


def _normal_pdf(x: np.ndarray) -> np.ndarray:
	return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _gelu(x: np.ndarray) -> np.ndarray:
	return x * ndtr(x)


def _gelu_d1(x: np.ndarray) -> np.ndarray:
	return ndtr(x) + x * _normal_pdf(x)


def _gelu_d2(x: np.ndarray) -> np.ndarray:
	return _normal_pdf(x) * (2.0 - x * x)


def _silu(x: np.ndarray) -> np.ndarray:
	return x * expit(x)


def _silu_d1(x: np.ndarray) -> np.ndarray:
	s = expit(x)
	return s + x * s * (1.0 - s)


def _silu_d2(x: np.ndarray) -> np.ndarray:
	s = expit(x)
	return s * (1.0 - s) * (2.0 + x * (1.0 - 2.0 * s))


ACTIVATIONS: Dict[str, Activation] = {
	"sigmoid": Activation("sigmoid", expit, _sigmoid_d1, _sigmoid_d2, 1.0),
	# Exact Gaussian-CDF form, not the tanh approximation.
	"gelu": Activation("gelu", _gelu, _gelu_d1, _gelu_d2, None),
	"silu": Activation("silu", _silu, _silu_d1, _silu_d2, None),
}


def get_activation(name: str) -> Activation:
	try:
		return ACTIVATIONS[name]
	except KeyError:
		raise ValueError(f"Unknown activation {name!r} (expected one of: {', '.join(ACTIVATIONS)})") from None
