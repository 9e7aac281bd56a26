"""Two-layer networks Phi(w, theta)(x) = sigma(<theta, x>) w."""

from __future__ import annotations

from typing import Any, Dict, Tuple

import numpy as np

from .activations import Activation, get_activation
from .base import ModelSpec


def sigmoid_phi(theta: np.ndarray, x: np.ndarray, activation: str = "sigmoid") -> Tuple[float, float]:
	"""(sigma(<theta,x>), sigma'(<theta,x>)) for one input."""

	act = get_activation(activation)
	s = np.asarray(float(np.dot(theta, x)))
	return float(act.value(s)), float(act.d1(s))


class SigmoidNet(ModelSpec):
	family = "sigmoid"

	def __init__(self, d_in: int, d_out: int, activation: str = "sigmoid") -> None:
		if d_in < 1 or d_out < 1:
			raise ValueError(f"SigmoidNet needs positive widths, got d_in={d_in}, d_out={d_out}")
		self._d_in = int(d_in)
		self._d_out = int(d_out)
		self.activation: Activation = get_activation(activation)

	def __repr__(self) -> str:
		return f"SigmoidNet(d_in={self._d_in}, d_out={self._d_out}, activation={self.activation.name!r})"

	@property
	def d_w(self) -> int:
		return self._d_out

	@property
	def d_theta(self) -> int:
		return self._d_in

	@property
	def d_in(self) -> int:
		return self._d_in

	@property
	def d_out(self) -> int:
		return self._d_out

	def descriptor(self) -> Dict[str, Any]:
		return {"family": self.family, "activation": self.activation.name, "d_in": self._d_in, "d_out": self._d_out}

	def _pre(self, Theta: np.ndarray, X: np.ndarray) -> np.ndarray:
		return Theta @ X.T

	def evaluate(self, W, Theta, X):
		W, Theta = self.check_params(W, Theta)
		X = self.check_inputs(X)
		a = self.activation.value(self._pre(Theta, X))
		return a[:, :, None] * W[:, None, :]

	def mean_prediction(self, W, Theta, X):
		W, Theta = self.check_params(W, Theta)
		X = self.check_inputs(X)
		a = self.activation.value(self._pre(Theta, X))
		return (a.T @ W) / W.shape[0]

	def adjoint(self, Theta, X, R):
		Theta = np.atleast_2d(np.asarray(Theta, dtype=np.float64))
		X = self.check_inputs(X)
		a = self.activation.value(self._pre(Theta, X))
		return (a @ np.asarray(R, dtype=np.float64)) / X.shape[0]

	def theta_pullback(self, W, Theta, X, R):
		W, Theta = self.check_params(W, Theta)
		X = self.check_inputs(X)
		coef = self.activation.d1(self._pre(Theta, X)) * (W @ np.asarray(R, dtype=np.float64).T)
		return (coef @ X) / X.shape[0]

	def adjoint_jacobian(self, theta, X, R):
		X = self.check_inputs(X)
		R = np.asarray(R, dtype=np.float64)
		d1 = self.activation.d1(X @ np.asarray(theta, dtype=np.float64))
		return ((R * d1[:, None]).T @ X) / X.shape[0]

	def adjoint_hessian_vector(self, theta, X, R, u):
		X = self.check_inputs(X)
		d2 = self.activation.d2(X @ np.asarray(theta, dtype=np.float64))
		weights = d2 * (np.asarray(R, dtype=np.float64) @ np.asarray(u, dtype=np.float64))
		return (X.T @ (X * weights[:, None])) / X.shape[0]
