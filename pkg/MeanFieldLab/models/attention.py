"""Single softmax attention head Phi(V, A)(X) = V psi(A)(X), psi(A)(X) = X^T softmax(X A x_n).

Contexts are ``n x d`` arrays, rows are tokens, the last row is the query
token ``x_n``. Dataset rows store contexts flattened row-major.
"""

from __future__ import annotations

import logging
from typing import Any, Dict

import numpy as np

from ..core import DimensionMismatch
from .base import ModelSpec
from .softmax import DEFAULT_TIE_TOL, dsoftmax, hardmax, softmax

logger = logging.getLogger(__name__)


def scores(A: np.ndarray, X: np.ndarray) -> np.ndarray:
	"""Token scores X A x_n."""

	X = np.asarray(X, dtype=np.float64)
	return X @ (np.asarray(A, dtype=np.float64) @ X[-1])


def psi_attention(A: np.ndarray, X: np.ndarray) -> np.ndarray:
	X = np.asarray(X, dtype=np.float64)
	return X.T @ softmax(scores(A, X))


def dpsi_attention(A: np.ndarray, B: np.ndarray, X: np.ndarray) -> np.ndarray:
	"""Directional derivative of psi at A along B."""

	X = np.asarray(X, dtype=np.float64)
	return X.T @ dsoftmax(scores(A, X), X @ (np.asarray(B, dtype=np.float64) @ X[-1]))


def psi_hardmax(A: np.ndarray, X: np.ndarray, tie_tol: float = DEFAULT_TIE_TOL) -> np.ndarray:
	"""Uniform average of the argmax tokens; the large-scale limit of psi_attention(r A, X)."""

	X = np.asarray(X, dtype=np.float64)
	return X.T @ hardmax(scores(A, X), tie_tol)


def alpha_coarea(A: np.ndarray, X: np.ndarray, i: int, j: int):
	"""|grad_X <A x_n, x_i - x_j>| for 0-based token indices; the query is index n-1.

	``X`` is one ``n x d`` context (returns a float) or a batch ``(N, n, d)`` (returns N values).
	"""

	A = np.asarray(A, dtype=np.float64)
	X = np.asarray(X, dtype=np.float64)
	single = X.ndim == 2
	Xb = X[None] if single else X
	n = Xb.shape[1]
	if i == j:
		raise ValueError(f"alpha_coarea needs distinct tokens, got i = j = {i}")
	for idx in (i, j):
		if not 0 <= idx < n:
			raise IndexError(f"token index {idx} out of range for n={n}")
	q = n - 1
	a = Xb[:, q, :] @ A.T
	aa = np.sum(a * a, axis=1)
	if i != q and j != q:
		back = (Xb[:, i, :] - Xb[:, j, :]) @ A
		out = np.sqrt(2.0 * aa + np.sum(back * back, axis=1))
	elif i == q:
		head = (Xb[:, q, :] - Xb[:, j, :]) @ A + a
		out = np.sqrt(np.sum(head * head, axis=1) + aa)
	else:
		head = (Xb[:, i, :] - Xb[:, q, :]) @ A - a
		out = np.sqrt(aa + np.sum(head * head, axis=1))
	return float(out[0]) if single else out


def attention_gradient(A: np.ndarray, contexts: np.ndarray, f_values: np.ndarray) -> np.ndarray:
	"""Gradient in A of (1/N) sum_s <f_s, psi(A)(X_s)>.

	``contexts`` is ``(N, n, d)``, ``f_values`` is ``(N, d)``; the result is ``d x d``.
	"""

	Xc = np.asarray(contexts, dtype=np.float64)
	xq = Xc[:, -1, :]
	P = softmax(np.einsum("snd,de,se->sn", Xc, np.asarray(A, dtype=np.float64), xq))
	c = np.einsum("snd,sd->sn", Xc, np.asarray(f_values, dtype=np.float64))
	delta = P * (c - np.sum(P * c, axis=1, keepdims=True))
	return np.einsum("snd,sn,se->de", Xc, delta, xq) / Xc.shape[0]


class AttentionHead(ModelSpec):
	family = "attention"

	def __init__(self, d: int, n: int, k: int | None = None) -> None:
		if d < 1 or n < 1:
			raise ValueError(f"AttentionHead needs positive d and n, got d={d}, n={n}")
		self.d = int(d)
		self.n = int(n)
		self.k = int(k if k is not None else d)

	def __repr__(self) -> str:
		return f"AttentionHead(d={self.d}, n={self.n}, k={self.k})"

	@property
	def d_w(self) -> int:
		return self.k * self.d

	@property
	def d_theta(self) -> int:
		return self.d * self.d

	@property
	def d_in(self) -> int:
		return self.n * self.d

	@property
	def d_out(self) -> int:
		return self.k

	def descriptor(self) -> Dict[str, Any]:
		return {"family": self.family, "d": self.d, "n": self.n, "k": self.k}

	def contexts(self, X: np.ndarray) -> np.ndarray:
		X = self.check_inputs(X)
		return X.reshape(X.shape[0], self.n, self.d)

	def _weights(self, Theta: np.ndarray, Xc: np.ndarray) -> np.ndarray:
		A = np.atleast_2d(np.asarray(Theta, dtype=np.float64)).reshape(-1, self.d, self.d)
		if A.shape[0] == 0:
			raise DimensionMismatch("attention particles", ">= 1", 0)
		return softmax(np.einsum("snd,mde,se->msn", Xc, A, Xc[:, -1, :]))

	def _psi(self, Theta: np.ndarray, Xc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
		P = self._weights(Theta, Xc)
		return P, np.einsum("msn,snd->msd", P, Xc)

	def evaluate(self, W, Theta, X):
		W, Theta = self.check_params(W, Theta)
		_, Psi = self._psi(Theta, self.contexts(X))
		V = W.reshape(-1, self.k, self.d)
		return np.einsum("mkd,msd->msk", V, Psi)

	def adjoint(self, Theta, X, R):
		Xc = self.contexts(X)
		_, Psi = self._psi(Theta, Xc)
		g = np.einsum("sk,msd->mkd", np.asarray(R, dtype=np.float64), Psi) / Xc.shape[0]
		return g.reshape(g.shape[0], self.d_w)

	def theta_pullback(self, W, Theta, X, R):
		W, Theta = self.check_params(W, Theta)
		Xc = self.contexts(X)
		P = self._weights(Theta, Xc)
		f = np.einsum("mkd,sk->msd", W.reshape(-1, self.k, self.d), np.asarray(R, dtype=np.float64))
		c = np.einsum("snd,msd->msn", Xc, f)
		delta = P * (c - np.sum(P * c, axis=2, keepdims=True))
		G = np.einsum("snd,msn,se->mde", Xc, delta, Xc[:, -1, :]) / Xc.shape[0]
		return G.reshape(G.shape[0], self.d_theta)

	def adjoint_jacobian(self, theta, X, R):
		Xc = self.contexts(X)
		P, Psi = self._psi(np.asarray(theta)[None, :], Xc)
		P, Psi = P[0], Psi[0]
		# C_s = X^T diag(p) X - psi psi^T
		C = np.einsum("snd,sn,sne->sde", Xc, P, Xc) - np.einsum("sd,se->sde", Psi, Psi)
		J = np.einsum("sk,sda,sb->kdab", np.asarray(R, dtype=np.float64), C, Xc[:, -1, :]) / Xc.shape[0]
		return J.reshape(self.d_w, self.d_theta)
