"""Square and cross-entropy losses, the empirical risk and its residual, and the
smooth truncation ``xi`` used to build truncated energies.

Everything operates on arrays: ``z`` and ``y`` are a single ``d_out`` vector for
the scalar helpers and ``N x d_out`` batches for the ``*_values`` / ``risk``
variants.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Mapping

import numpy as np
from scipy.special import logsumexp, softmax

from .core import DimensionMismatch

logger = logging.getLogger(__name__)

LOSS_KINDS = ("square", "cross-entropy")

# Lipschitz constants of z -> grad loss(z, y).
LIPSCHITZ: Dict[str, float] = {"square": 1.0, "cross-entropy": 2.0}


class LabelError(ValueError):
	"""Cross-entropy labels must be one-hot vectors of the canonical basis."""


@dataclass(frozen=True)
class LossSpec:
	kind: str
	d_out: int

	def __post_init__(self) -> None:
		if self.kind not in LOSS_KINDS:
			raise ValueError(f"loss kind must be one of {LOSS_KINDS}, got {self.kind!r}")
		if int(self.d_out) < 1:
			raise ValueError(f"d_out must be positive, got {self.d_out}")

	def descriptor(self) -> Dict[str, Any]:
		return {"kind": self.kind, "d_out": int(self.d_out)}

	@classmethod
	def from_descriptor(cls, data: Mapping[str, Any], d_out: int) -> "LossSpec":
		return cls(kind=str(data.get("kind", "square")), d_out=int(data.get("d_out", d_out)))


def _as_batch(spec: LossSpec, z: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
	z = np.atleast_2d(np.asarray(z, dtype=np.float64))
	y = np.atleast_2d(np.asarray(y, dtype=np.float64))
	if z.shape != y.shape:
		raise DimensionMismatch("prediction/label shape", z.shape, y.shape)
	if z.shape[1] != spec.d_out:
		raise DimensionMismatch("d_out", spec.d_out, z.shape[1])
	if spec.kind == "cross-entropy":
		check_one_hot(y)
	return z, y


def check_one_hot(y: np.ndarray) -> None:
	"""Exactly one entry equal to 1 per row, every other entry 0 (no tolerance)."""

	y = np.atleast_2d(np.asarray(y, dtype=np.float64))
	ones = np.sum(y == 1.0, axis=1)
	zeros = np.sum(y == 0.0, axis=1)
	bad = np.flatnonzero((ones != 1) | (ones + zeros != y.shape[1]))
	if bad.size:
		raise LabelError(f"{bad.size} label row(s) are not one-hot (first offending row {int(bad[0])})")


def loss_values(spec: LossSpec, z: np.ndarray, y: np.ndarray) -> np.ndarray:
	"""Per-sample losses for ``N x d_out`` batches."""

	z, y = _as_batch(spec, z, y)
	if spec.kind == "square":
		return 0.5 * np.sum((z - y) ** 2, axis=1)
	# Clamp: for one-hot y the value is >= 0 mathematically.
	return np.maximum(logsumexp(z, axis=1) - np.sum(z * y, axis=1), 0.0)


def loss_grads(spec: LossSpec, z: np.ndarray, y: np.ndarray) -> np.ndarray:
	z, y = _as_batch(spec, z, y)
	if spec.kind == "square":
		return z - y
	return softmax(z, axis=1) - y


def loss_value(spec: LossSpec, z: np.ndarray, y: np.ndarray) -> float:
	return float(loss_values(spec, z, y)[0])


def loss_grad(spec: LossSpec, z: np.ndarray, y: np.ndarray) -> np.ndarray:
	return loss_grads(spec, z, y)[0]


def risk(spec: LossSpec, predictions: np.ndarray, labels: np.ndarray) -> float:
	"""Empirical risk (1/N) sum_s loss(z_s, y_s)."""

	return float(np.mean(loss_values(spec, predictions, labels)))


def risk_residual(spec: LossSpec, predictions: np.ndarray, labels: np.ndarray) -> np.ndarray:
	"""Row s is grad_z loss(z_s, y_s); the differential of the risk in L2 of the empirical inputs."""

	return loss_grads(spec, predictions, labels)


def residual_sq_norm(residual: np.ndarray) -> float:
	"""Squared L2 norm under the empirical input measure: (1/N) sum_s |r_s|^2."""

	r = np.atleast_2d(residual)
	return float(np.mean(np.sum(r * r, axis=1)))


@dataclass(frozen=True)
class Truncation:
	"""Smooth cap: identity on [0, alpha], constant 2*alpha beyond 2*alpha.

	The middle branch glues C^2 at ``alpha`` and C^1 at ``2*alpha``.
	"""

	alpha: float

	def __post_init__(self) -> None:
		if not (self.alpha > 0 and math.isfinite(self.alpha)):
			raise ValueError(f"truncation alpha must be positive and finite, got {self.alpha}")

	def descriptor(self) -> Dict[str, Any]:
		return {"alpha": float(self.alpha)}


def _middle_terms(a: float, x: np.ndarray):
	u = x - a
	k = math.pi / a
	p = u * (a - u)
	dp = a - 2.0 * u
	q = 1.0 - np.cos(k * u)
	dq = k * np.sin(k * u)
	ddq = k * k * np.cos(k * u)
	return p, dp, q, dq, ddq


def _branches(t: Truncation, x, lower, middle, upper):
	x = np.asarray(x, dtype=np.float64)
	a = t.alpha
	out = np.where(x <= a, lower(x), np.where(x >= 2.0 * a, upper(x), middle(np.clip(x, a, 2.0 * a))))
	return float(out) if out.ndim == 0 else out


def xi(t: Truncation, x):
	a = t.alpha

	def middle(v):
		p, _, q, _, _ = _middle_terms(a, v)
		return v + p * q / (2.0 * a)

	return _branches(t, x, lambda v: v, middle, lambda v: np.full_like(v, 2.0 * a))


def xi_prime(t: Truncation, x):
	a = t.alpha

	def middle(v):
		p, dp, q, dq, _ = _middle_terms(a, v)
		return 1.0 + (dp * q + p * dq) / (2.0 * a)

	return _branches(t, x, np.ones_like, middle, np.zeros_like)


def xi_double_prime(t: Truncation, x):
	a = t.alpha

	def middle(v):
		p, dp, q, dq, ddq = _middle_terms(a, v)
		return (-2.0 * q + 2.0 * dp * dq + p * ddq) / (2.0 * a)

	return _branches(t, x, np.zeros_like, middle, np.zeros_like)
