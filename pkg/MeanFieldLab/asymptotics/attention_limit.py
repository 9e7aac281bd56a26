"""Explorer for the conjectured large-scale limit of r grad g_f(r A), g_f(A) = E<f(X), psi(A)(X)>.

The candidate limit is a sum over ordered token pairs (i, j) of surface integrals
over {<A x_n, x_i - x_j> = 0, i maximal} with coarea weight 1 / alpha_ij. Tokens
are i.i.d. N(0, s^2 I_d). For each pair one non-query token is drawn conditionally
on the score difference u: u = 0 for the limit side, u ~ Logistic(0, 1/r) for the
finite-r side, so both sides are smooth functions of the same random numbers.

Nothing here is a theorem; every report is labelled CONJECTURE.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from ..models.attention import alpha_coarea
from ..models.softmax import softmax
from .hardmax_scan import check_r_grid

logger = logging.getLogger(__name__)

LABEL = "CONJECTURE"
TIE_SLACK = 1e-12

ContextFn = Callable[[np.ndarray], np.ndarray]

CONTEXT_FUNCTIONS: Dict[str, ContextFn] = {
	"zero": lambda Xc: np.zeros((Xc.shape[0], Xc.shape[2])),
	"tanh-first-token": lambda Xc: np.tanh(Xc[:, 0, :]),
	"first-token": lambda Xc: Xc[:, 0, :],
	"tanh-query": lambda Xc: np.tanh(Xc[:, -1, :]),
}


def context_function(name: str) -> ContextFn:
	try:
		return CONTEXT_FUNCTIONS[name]
	except KeyError:
		raise ValueError(f"unknown context function {name!r} (expected one of {', '.join(sorted(CONTEXT_FUNCTIONS))})") from None


@dataclass
class PairSamples:
	"""Conditioned contexts for one ordered pair (i, j)."""

	i: int
	j: int
	kept: np.ndarray
	base: np.ndarray
	ahat: np.ndarray
	a_norm: np.ndarray
	partner_score: np.ndarray
	conditioned: int


def _pair_samples(A: np.ndarray, Z: np.ndarray, i: int, j: int, alpha_floor: float) -> PairSamples:
	n = Z.shape[1]
	q = n - 1
	t = j if j != q else i
	partner = i if t == j else j
	a = Z[:, q, :] @ A.T
	a_norm = np.linalg.norm(a, axis=1)
	safe = np.where(a_norm > 0, a_norm, 1.0)
	ahat = a / safe[:, None]
	base = Z.copy()
	zt = base[:, t, :]
	base[:, t, :] = zt - np.sum(zt * ahat, axis=1, keepdims=True) * ahat
	c = np.sum(a * base[:, partner, :], axis=1)
	limit_X = base.copy()
	limit_X[:, t, :] += (c / safe)[:, None] * ahat
	kept = (a_norm > 0) & (alpha_coarea(A, limit_X, i, j) >= alpha_floor)
	return PairSamples(i, j, kept, base, ahat, a_norm, c, t)


def _contexts_at(ps: PairSamples, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
	"""Contexts with score_t = score_partner + u, and the weight rho_par(s) / |a|."""

	safe = np.where(ps.a_norm > 0, ps.a_norm, 1.0)
	s = (ps.partner_score + u) / safe
	X = ps.base.copy()
	X[:, ps.conditioned, :] += s[:, None] * ps.ahat
	return X, s


def _pair_terms(
	A: np.ndarray,
	ps: PairSamples,
	f: ContextFn,
	token_scale: float,
	L: np.ndarray,
	r: float | None,
) -> np.ndarray:
	"""Per-sample d x d contributions of pair (i, j); ``r=None`` is the limit side."""

	u = np.zeros_like(L) if r is None else L / r
	X, s = _contexts_at(ps, u)
	safe = np.where(ps.a_norm > 0, ps.a_norm, 1.0)
	weight = norm.pdf(s, scale=token_scale) / safe
	fi = np.sum(f(X) * X[:, ps.i, :], axis=1)
	if r is None:
		scores = np.einsum("snd,sd->sn", X, X[:, -1, :] @ A.T)
		top = np.max(scores, axis=1)
		factor = (scores[:, ps.i] >= top - TIE_SLACK * np.maximum(1.0, np.abs(top))).astype(np.float64)
	else:
		P = softmax(r * np.einsum("snd,sd->sn", X, X[:, -1, :] @ A.T))
		# r sigma_i sigma_j / q(u) with q the Logistic(0, 1/r) density.
		factor = P[:, ps.i] * P[:, ps.j] / (expit(L) * expit(-L))
	coef = np.where(ps.kept, factor * weight * fi, 0.0)
	diff = X[:, ps.i, :] - X[:, ps.j, :]
	return np.einsum("s,sa,sb->sab", coef, diff, X[:, -1, :])


@dataclass
class AttentionLimitRow:
	r: float
	finite: np.ndarray
	gap: float
	stderr: float
	paired_stderr: float

	def to_dict(self) -> Dict[str, Any]:
		return {
			"r": self.r,
			"finite": self.finite.tolist(),
			"gap": self.gap,
			"stderr": self.stderr,
			"paired_stderr": self.paired_stderr,
		}


@dataclass
class AttentionLimitReport:
	A: np.ndarray
	limit: np.ndarray
	limit_stderr: float
	rows: List[AttentionLimitRow]
	skipped_fraction: float
	alpha_floor: float
	n_samples: int
	label: str = LABEL
	extras: Dict[str, Any] = field(default_factory=dict)

	@property
	def consecutive_gaps(self) -> List[float]:
		return [float(np.linalg.norm(b.finite - a.finite)) for a, b in zip(self.rows, self.rows[1:])]

	@property
	def cauchy_consistent(self) -> bool:
		"""Consecutive finite-r estimates get closer along the grid."""

		g = self.consecutive_gaps
		return all(b <= a for a, b in zip(g, g[1:]))

	def to_dict(self) -> Dict[str, Any]:
		return {
			"label": self.label,
			"A": self.A.tolist(),
			"limit": self.limit.tolist(),
			"limit_stderr": self.limit_stderr,
			"rows": [row.to_dict() for row in self.rows],
			"consecutive_gaps": self.consecutive_gaps,
			"cauchy_consistent": self.cauchy_consistent,
			"skipped_fraction": self.skipped_fraction,
			"alpha_floor": self.alpha_floor,
			"n_samples": self.n_samples,
			**self.extras,
		}


def attention_gradient_limit_explore(
	f: ContextFn,
	A,
	r_grid: Sequence[float],
	*,
	n: int,
	n_samples: int = 200_000,
	token_scale: float = 1.0,
	alpha_floor: float = 1e-6,
	seed: int = 0,
) -> AttentionLimitReport:
	"""Finite-r estimates of r grad g_f(r A) and the candidate surface-integral limit.

	Samples with alpha_ij below ``alpha_floor`` are dropped from both sides and
	reported as ``skipped_fraction`` (over all pair samples).
	"""

	A = np.asarray(A, dtype=np.float64)
	d = A.shape[0]
	if A.shape != (d, d):
		raise ValueError(f"A must be square, got shape {A.shape}")
	fro = float(np.linalg.norm(A))
	if fro == 0.0:
		raise ValueError("A must be nonzero")
	A = A / fro
	r = check_r_grid(r_grid, allow_zero=False)
	rng = np.random.default_rng(seed)
	Z = token_scale * rng.standard_normal((n_samples, n, d))
	L = rng.logistic(size=n_samples)

	pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
	samples = [_pair_samples(A, Z, i, j, alpha_floor) for i, j in pairs]
	skipped = sum(int(np.sum(~ps.kept)) for ps in samples)
	total = n_samples * len(pairs)
	skipped_fraction = skipped / total if total else 0.0
	if skipped:
		logger.warning("Skipped %d of %d pair samples with alpha below %.3g", skipped, total, alpha_floor)

	limit_terms = np.zeros((n_samples, d, d))
	for ps in samples:
		limit_terms += _pair_terms(A, ps, f, token_scale, L, None)
	limit = limit_terms.mean(axis=0)
	limit_se = float(np.linalg.norm(limit_terms.std(axis=0, ddof=1))) / math.sqrt(n_samples) if n_samples > 1 else 0.0

	rows = []
	for rk in r:
		terms = np.zeros((n_samples, d, d))
		for ps in samples:
			terms += _pair_terms(A, ps, f, token_scale, L, float(rk))
		finite = terms.mean(axis=0)
		se = float(np.linalg.norm(terms.std(axis=0, ddof=1))) / math.sqrt(n_samples) if n_samples > 1 else 0.0
		paired = float(np.linalg.norm((terms - limit_terms).std(axis=0, ddof=1))) / math.sqrt(n_samples) if n_samples > 1 else 0.0
		rows.append(AttentionLimitRow(float(rk), finite, float(np.linalg.norm(finite - limit)), math.hypot(se, limit_se), paired))
	report = AttentionLimitReport(A, limit, limit_se, rows, skipped_fraction, float(alpha_floor), int(n_samples))
	logger.info(
		"[%s] attention gradient limit: gaps %s, skipped %.2e",
		LABEL,
		", ".join(f"{row.gap:.3g}" for row in rows),
		skipped_fraction,
	)
	return report
