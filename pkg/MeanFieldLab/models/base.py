"""Model families of the form Phi(w, theta) = phi(theta) w.

Subclasses implement batched primitives over a whole ensemble (``W`` is
``m x d_w``, ``Theta`` is ``m x d_theta``) and a dataset ``X`` (``N x d_in``);
the single-particle operations are derived from them here.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, Dict

import numpy as np

from ..core import DimensionMismatch

# Central-difference step for the default Hessian-vector product.
HESSIAN_FD_STEP = 1e-5


class ModelSpec(ABC):
	"""Base class for model families linear in ``w``.

	Implement the dimensions, :meth:`evaluate`, :meth:`adjoint`,
	:meth:`theta_pullback` and :meth:`adjoint_jacobian`. Override
	:meth:`mean_prediction` and :meth:`adjoint_hessian_vector` when a cheaper
	or analytic form exists.
	"""

	family: str = ""

	@property
	@abstractmethod
	def d_w(self) -> int:
		...

	@property
	@abstractmethod
	def d_theta(self) -> int:
		...

	@property
	@abstractmethod
	def d_in(self) -> int:
		...

	@property
	@abstractmethod
	def d_out(self) -> int:
		...

	@abstractmethod
	def descriptor(self) -> Dict[str, Any]:
		"""JSON-ready description, inverse of ``registry.model_from_descriptor``."""

	@abstractmethod
	def evaluate(self, W: np.ndarray, Theta: np.ndarray, X: np.ndarray) -> np.ndarray:
		"""Per-particle predictions, shape ``(m, N, d_out)``."""

	@abstractmethod
	def adjoint(self, Theta: np.ndarray, X: np.ndarray, R: np.ndarray) -> np.ndarray:
		"""Rows ``(1/N) sum_s phi(theta_i)^* r_s``, shape ``(m, d_w)``."""

	@abstractmethod
	def theta_pullback(self, W: np.ndarray, Theta: np.ndarray, X: np.ndarray, R: np.ndarray) -> np.ndarray:
		"""Rows ``grad_theta <g(theta_i), w_i>``, i.e. ``J_g(theta_i)^T w_i``; shape ``(m, d_theta)``."""

	@abstractmethod
	def adjoint_jacobian(self, theta: np.ndarray, X: np.ndarray, R: np.ndarray) -> np.ndarray:
		"""Jacobian of ``theta -> (1/N) sum_s phi(theta)^* r_s``, shape ``(d_w, d_theta)``."""

	def mean_prediction(self, W: np.ndarray, Theta: np.ndarray, X: np.ndarray) -> np.ndarray:
		return np.mean(self.evaluate(W, Theta, X), axis=0)

	def adjoint_hessian_vector(self, theta: np.ndarray, X: np.ndarray, R: np.ndarray, u: np.ndarray) -> np.ndarray:
		"""``sum_k u_k Hess g_k(theta)`` by central differences of ``J^T u``."""

		theta = np.asarray(theta, dtype=np.float64)
		u = np.asarray(u, dtype=np.float64)
		h = HESSIAN_FD_STEP * max(1.0, float(np.linalg.norm(theta)))
		cols = []
		for j in range(theta.size):
			e = np.zeros_like(theta)
			e[j] = h
			plus = self.adjoint_jacobian(theta + e, X, R).T @ u
			minus = self.adjoint_jacobian(theta - e, X, R).T @ u
			cols.append((plus - minus) / (2.0 * h))
		H = np.stack(cols, axis=1)
		return 0.5 * (H + H.T)

	def check_inputs(self, X: np.ndarray) -> np.ndarray:
		X = np.atleast_2d(np.asarray(X, dtype=np.float64))
		if X.shape[1] != self.d_in:
			raise DimensionMismatch(f"{self.family} input width", self.d_in, X.shape[1])
		return X

	def check_params(self, W: np.ndarray, Theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
		W = np.atleast_2d(np.asarray(W, dtype=np.float64))
		Theta = np.atleast_2d(np.asarray(Theta, dtype=np.float64))
		if W.shape[1] != self.d_w:
			raise DimensionMismatch(f"{self.family} d_w", self.d_w, W.shape[1])
		if Theta.shape[1] != self.d_theta:
			raise DimensionMismatch(f"{self.family} d_theta", self.d_theta, Theta.shape[1])
		return W, Theta

	# Single-particle views.

	def phi_apply(self, theta: np.ndarray, w: np.ndarray, x: np.ndarray) -> np.ndarray:
		"""Phi(w, theta)(x), a ``d_out`` vector."""

		return self.evaluate(np.asarray(w)[None, :], np.asarray(theta)[None, :], np.asarray(x)[None, :])[0, 0]

	def dphi_w(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
		"""Matrix of the linear map w -> phi(theta) w at input x, shape ``(d_out, d_w)``."""

		eye = np.eye(self.d_w)
		thetas = np.repeat(np.asarray(theta, dtype=np.float64)[None, :], self.d_w, axis=0)
		return self.evaluate(eye, thetas, np.asarray(x)[None, :])[:, 0, :].T

	def grad_theta(self, theta: np.ndarray, w: np.ndarray, x: np.ndarray, cotangent: np.ndarray) -> np.ndarray:
		"""Gradient in theta of <cotangent, Phi(w, theta)(x)>."""

		return self.theta_pullback(
			np.asarray(w)[None, :], np.asarray(theta)[None, :], np.asarray(x)[None, :], np.asarray(cotangent)[None, :]
		)[0]

	def phi_adjoint(self, theta: np.ndarray, X: np.ndarray, R: np.ndarray) -> np.ndarray:
		"""phi(theta)^* applied to the empirical residual R (``N x d_out``)."""

		return self.adjoint(np.asarray(theta)[None, :], X, R)[0]
