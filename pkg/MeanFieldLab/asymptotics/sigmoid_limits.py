"""Large-scale limits of sigmoid-induced fields g_f(theta) = E[f(x) sigma(<theta, x>)].

Along r theta (|theta| = 1) the field tends to the half-space integral
E[f(x) 1{<theta, x> >= 0}], and r grad g_f(r theta) tends to the hyperplane
integral of f rho x over {<theta, x> = 0}. Both sides of the gradient check
share hyperplane samples: the finite-r side draws the normal coordinate from a
logistic law of scale 1/r, whose density is exactly r sigma'(r t).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import null_space
from scipy.special import expit

from ..escape.fields import AsymptoticField
from .densities import Density, proposal_logpdf, require_decay, sample_proposal
from .hardmax_scan import check_r_grid

logger = logging.getLogger(__name__)

ScalarFn = Callable[[np.ndarray], np.ndarray]

SCALAR_FUNCTIONS: Dict[str, ScalarFn] = {
	"one": lambda X: np.ones(X.shape[0]),
	"zero": lambda X: np.zeros(X.shape[0]),
	"first": lambda X: X[:, 0],
	"tanh-first": lambda X: np.tanh(X[:, 0]),
	"sin-first": lambda X: np.sin(X[:, 0]),
	"cos-norm": lambda X: np.cos(np.linalg.norm(X, axis=1)),
}


def scalar_function(name: str) -> ScalarFn:
	try:
		return SCALAR_FUNCTIONS[name]
	except KeyError:
		raise ValueError(f"unknown test function {name!r} (expected one of {', '.join(sorted(SCALAR_FUNCTIONS))})") from None


def _unit(theta) -> np.ndarray:
	theta = np.asarray(theta, dtype=np.float64).reshape(-1)
	n = float(np.linalg.norm(theta))
	if n == 0.0:
		raise ValueError("theta must be nonzero")
	return theta / n


@dataclass
class LimitRow:
	r: float
	finite: Any
	limit: Any
	gap: float
	stderr: float
	paired_stderr: float

	def within(self, n_sigma: float) -> bool:
		return self.gap <= n_sigma * self.stderr

	def to_dict(self) -> Dict[str, Any]:
		def plain(v):
			return v.tolist() if isinstance(v, np.ndarray) else v

		return {
			"r": self.r,
			"finite": plain(self.finite),
			"limit": plain(self.limit),
			"gap": self.gap,
			"stderr": self.stderr,
			"paired_stderr": self.paired_stderr,
		}


@dataclass
class LimitTable:
	check: str
	theta: np.ndarray
	n_samples: int
	rows: List[LimitRow]

	@property
	def last(self) -> LimitRow:
		return self.rows[-1]

	def to_dict(self) -> Dict[str, Any]:
		return {
			"check": self.check,
			"theta": self.theta.tolist(),
			"n_samples": self.n_samples,
			"rows": [row.to_dict() for row in self.rows],
			"last_within_3_stderr": self.last.within(3.0),
		}


def sigmoid_halfspace_check(
	f: ScalarFn,
	theta,
	r_grid: Sequence[float],
	*,
	density: Optional[Density] = None,
	samples: Optional[np.ndarray] = None,
	n_samples: int = 1_000_000,
	seed: int = 0,
) -> LimitTable:
	"""E[f(x) sigma(r <theta, x>)] against E[f(x) 1{<theta, x> >= 0}] on shared samples.

	``stderr`` combines the standard errors of both estimates (conservative);
	``paired_stderr`` is the standard error of the per-sample difference.
	"""

	theta = _unit(theta)
	if samples is None:
		if density is None:
			raise ValueError("pass either a density or explicit samples")
		samples = density.sample(n_samples, np.random.default_rng(seed))
	X = np.asarray(samples, dtype=np.float64)
	if X.shape[1] != theta.shape[0]:
		raise ValueError(f"samples have dimension {X.shape[1]}, theta has {theta.shape[0]}")
	r = check_r_grid(r_grid)
	N = X.shape[0]
	fx = np.asarray(f(X), dtype=np.float64)
	t = X @ theta
	half = fx * (t >= 0.0)
	limit = float(np.mean(half))
	se_limit = float(np.std(half, ddof=1) / math.sqrt(N))
	rows = []
	for rk in r:
		vals = fx * expit(rk * t)
		finite = float(np.mean(vals))
		se_finite = float(np.std(vals, ddof=1) / math.sqrt(N))
		paired = float(np.std(vals - half, ddof=1) / math.sqrt(N))
		rows.append(LimitRow(float(rk), finite, limit, abs(finite - limit), math.hypot(se_finite, se_limit), paired))
	logger.debug("Half-space check at theta=%s: last gap %.3g (stderr %.3g)", theta, rows[-1].gap, rows[-1].stderr)
	return LimitTable("sigmoid-halfspace", theta, N, rows)


def _hyperplane_terms(f: ScalarFn, density: Density, theta: np.ndarray, Y: np.ndarray, log_q: np.ndarray, t: np.ndarray):
	"""Per-sample f(x) rho(x) x / q(y) at x = B y + t theta."""

	B = null_space(theta[None, :])
	X = Y @ B.T + t[:, None] * theta[None, :]
	w = np.exp(density.logpdf(X) - log_q)
	return (np.asarray(f(X), dtype=np.float64) * w)[:, None] * X


def sigmoid_gradient_limit_check(
	f: ScalarFn,
	density: Density,
	theta,
	r_grid: Sequence[float],
	*,
	n_samples: int = 200_000,
	seed: int = 0,
) -> LimitTable:
	"""r grad g_f(r theta) against the density-weighted hyperplane integral of f x.

	Requires a declared decay exponent p > d_in (raises ``UndeclaredDecay``).
	"""

	theta = _unit(theta)
	d = theta.shape[0]
	if density.dim != d:
		raise ValueError(f"density has dimension {density.dim}, theta has {d}")
	require_decay(density, d)
	r = check_r_grid(r_grid)
	rng = np.random.default_rng(seed)
	proposal = density.hyperplane_proposal()
	Y = sample_proposal(proposal, d - 1, n_samples, rng)
	log_q = proposal_logpdf(proposal, Y)
	L = rng.logistic(size=n_samples)
	limit_terms = _hyperplane_terms(f, density, theta, Y, log_q, np.zeros(n_samples))
	limit = limit_terms.mean(axis=0)
	se_limit = limit_terms.std(axis=0, ddof=1) / math.sqrt(n_samples)
	rows = []
	for rk in r:
		if rk == 0.0:
			zero = np.zeros(d)
			rows.append(LimitRow(0.0, zero, limit, float(np.linalg.norm(limit)), float(np.linalg.norm(se_limit)), float(np.linalg.norm(se_limit))))
			continue
		terms = _hyperplane_terms(f, density, theta, Y, log_q, L / rk)
		finite = terms.mean(axis=0)
		se = terms.std(axis=0, ddof=1) / math.sqrt(n_samples)
		paired = (terms - limit_terms).std(axis=0, ddof=1) / math.sqrt(n_samples)
		rows.append(
			LimitRow(
				float(rk),
				finite,
				limit,
				float(np.linalg.norm(finite - limit)),
				float(np.linalg.norm(np.hypot(se, se_limit))),
				float(np.linalg.norm(paired)),
			)
		)
	return LimitTable("sigmoid-gradient", theta, n_samples, rows)


def halfspace_asymptote(
	f: ScalarFn,
	density: Density,
	*,
	n_samples: int = 100_000,
	n_surface: int = 50_000,
	seed: int = 0,
) -> AsymptoticField:
	"""Sphere limit g_inf(phi) = E[f(x) 1{<phi, x> >= 0}] with its hyperplane-integral gradient.

	Samples are drawn once, so the returned field is a deterministic function of phi.
	"""

	d = density.dim
	rng = np.random.default_rng(seed)
	X = density.sample(n_samples, rng)
	fx = np.asarray(f(X), dtype=np.float64)
	proposal = density.hyperplane_proposal()
	Y = sample_proposal(proposal, d - 1, n_surface, rng)
	log_q = proposal_logpdf(proposal, Y)
	zeros = np.zeros(n_surface)

	def value(phi: np.ndarray) -> float:
		return float(np.mean(fx * (X @ phi >= 0.0)))

	def gradient(phi: np.ndarray) -> np.ndarray:
		phi = _unit(phi)
		return _hyperplane_terms(f, density, phi, Y, log_q, zeros).mean(axis=0)

	return AsymptoticField(d, value, spherical_gradient_fn=gradient)
