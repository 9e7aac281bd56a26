"""Uniform convergence of softmax attention towards hardmax attention along r A, |A| = 1.

Rate of the sampled supremum: softmax(r s) differs from hardmax(s) by O(1) only on
contexts whose top-two score margin is below about 1/r, and by at most
2(n-1) exp(-r margin) elsewhere. For full-rank A the margin has a bounded density
at 0 and the L2 gap decays like r^(-1/2). Rank-one A = u v^T (the signed axes are
always sampled) give margins <v, x_q> <u, x_i - x_j>, a product of Gaussians whose
density grows like -log|margin| near 0, so the squared gap is of order log(r) / r.
The supremum over directions therefore follows K sqrt(log r / r).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from ..models.softmax import DEFAULT_TIE_TOL, hardmax, softmax
from ..workers import ordered_map
from .sphere import SphereSampler

logger = logging.getLogger(__name__)

HULL_TOL = 1e-12
# the log(r)/r law is asymptotic; smaller r are left out of the rate check
RATE_R_MIN = 10.0
RATE_TOLERANCE = 0.15


def check_r_grid(r_grid: Sequence[float], *, allow_zero: bool = True) -> np.ndarray:
	r = np.asarray(r_grid, dtype=np.float64)
	if r.ndim != 1 or r.size == 0:
		raise ValueError("r_grid must be a non-empty list")
	if np.any(np.diff(r) <= 0):
		raise ValueError(f"r_grid must be strictly increasing, got {list(r)}")
	if r[0] < 0 or (r[0] == 0 and not allow_zero):
		raise ValueError(f"r_grid must be {'nonnegative' if allow_zero else 'positive'}, got {list(r)}")
	return r


def direction_gaps(
	A: np.ndarray, contexts: np.ndarray, r_grid: np.ndarray, tie_tol: float = DEFAULT_TIE_TOL
) -> Tuple[np.ndarray, np.ndarray, bool]:
	"""Empirical L2 gap between psi(r A) and psi_inf(A) for each r, its standard error,
	and whether every softmax weight vector was a valid convex combination."""

	Xc = np.asarray(contexts, dtype=np.float64)
	S = np.einsum("snd,de,se->sn", Xc, np.asarray(A, dtype=np.float64), Xc[:, -1, :])
	limit = np.einsum("sn,snd->sd", hardmax(S, tie_tol), Xc)
	N = Xc.shape[0]
	gaps = np.empty(r_grid.shape[0])
	errs = np.empty(r_grid.shape[0])
	hull = True
	for k, r in enumerate(r_grid):
		P = softmax(r * S)
		hull = hull and bool(np.all(P >= -HULL_TOL) and np.allclose(P.sum(axis=1), 1.0, atol=1e-12))
		diff = np.einsum("sn,snd->sd", P, Xc) - limit
		sq = np.sum(diff * diff, axis=1)
		m = float(np.mean(sq))
		gaps[k] = np.sqrt(m)
		se_m = float(np.std(sq, ddof=1) / np.sqrt(N)) if N > 1 else 0.0
		errs[k] = se_m / (2.0 * gaps[k]) if gaps[k] > 0 else 0.0
	return gaps, errs, hull


@dataclass
class ConvergenceScan:
	"""Per-r sampled suprema of the gap; a lower bound on the supremum over the sphere."""

	r_grid: np.ndarray
	sup_gaps: np.ndarray
	sup_stderr: np.ndarray
	argsup: np.ndarray
	gaps: np.ndarray
	stderr: np.ndarray
	hull_ok: bool
	n_contexts: int
	extras: Dict[str, Any] = field(default_factory=dict)

	@property
	def n_directions(self) -> int:
		return int(self.gaps.shape[0])

	def non_increasing(self, n_sigma: float = 2.0) -> bool:
		"""sup gap never rises by more than ``n_sigma`` combined standard errors."""

		for k in range(1, self.r_grid.shape[0]):
			slack = n_sigma * float(np.hypot(self.sup_stderr[k], self.sup_stderr[k - 1]))
			if self.sup_gaps[k] > self.sup_gaps[k - 1] + slack:
				return False
		return True

	def rows(self) -> List[Tuple[float, int, float, float]]:
		"""(r, direction_id, gap, stderr) for every direction and r."""

		out = []
		for k, r in enumerate(self.r_grid):
			for j in range(self.n_directions):
				out.append((float(r), j, float(self.gaps[j, k]), float(self.stderr[j, k])))
		return out

	def to_dict(self) -> Dict[str, Any]:
		return {
			"r_grid": self.r_grid.tolist(),
			"sup_gaps": self.sup_gaps.tolist(),
			"sup_stderr": self.sup_stderr.tolist(),
			"argsup": self.argsup.tolist(),
			"non_increasing": self.non_increasing(),
			"hull_ok": self.hull_ok,
			"n_contexts": self.n_contexts,
			"n_directions": self.n_directions,
			"sup_is_lower_bound": True,
			**self.extras,
		}


def tie_band_rate(r) -> np.ndarray:
	"""sqrt(log r / r), the decay of the sampled sup gap; defined for r > 1."""

	r = np.asarray(r, dtype=np.float64)
	if np.any(r <= 1.0):
		raise ValueError("tie_band_rate needs r > 1")
	return np.sqrt(np.log(r) / r)


@dataclass
class RateCheck:
	"""Sup gaps divided by sqrt(log r / r) on the asymptotic part of the grid.

	Passes when that constant never grows by more than ``tolerance`` from one r to the
	next, i.e. the gap shrinks at least at the tie-band rate.
	"""

	r: np.ndarray
	constants: np.ndarray
	exponent: float
	tolerance: float
	passed: bool

	def predicted_gap(self, r: float) -> float:
		return float(self.constants[-1] * tie_band_rate(r))

	def r_for_gap(self, target: float) -> float:
		"""Smallest r past the last grid point where the rate predicts ``target``."""

		if target <= 0:
			raise ValueError("target gap must be positive")
		K = float(self.constants[-1])
		lo = max(float(self.r[-1]), math.e)
		if self.predicted_gap(lo) <= target:
			return lo
		hi = lo
		while K * math.sqrt(math.log(hi) / hi) > target:
			hi *= 10.0
		return float(brentq(lambda x: K * math.sqrt(math.log(x) / x) - target, lo, hi, rtol=1e-10))

	def to_dict(self) -> Dict[str, Any]:
		return {
			"rate": "sqrt(log r / r)",
			"r": self.r.tolist(),
			"constants": self.constants.tolist(),
			"fitted_exponent": self.exponent,
			"tolerance": self.tolerance,
			"pass": self.passed,
		}


def rate_check(scan: "ConvergenceScan", *, r_min: float = RATE_R_MIN, tolerance: float = RATE_TOLERANCE) -> RateCheck:
	r_min = max(float(r_min), 1.0 + 1e-12)
	keep = scan.r_grid >= r_min
	if int(np.count_nonzero(keep)) < 2:
		raise ValueError(f"rate check needs at least two r >= {r_min:g} in r_grid, got {scan.r_grid.tolist()}")
	r = scan.r_grid[keep]
	gaps = scan.sup_gaps[keep]
	K = gaps / tie_band_rate(r)
	positive = gaps > 0
	exponent = float(np.polyfit(np.log(r[positive]), np.log(gaps[positive]), 1)[0]) if np.count_nonzero(positive) >= 2 else -math.inf
	passed = bool(np.all(K[1:] <= (1.0 + tolerance) * K[:-1]))
	logger.info("Hardmax rate: K %s, fitted exponent %.3f -> %s", np.array2string(K, precision=4), exponent, "PASS" if passed else "FAIL")
	return RateCheck(r, K, exponent, float(tolerance), passed)


def hardmax_convergence_scan(
	contexts: np.ndarray,
	sphere: SphereSampler | np.ndarray,
	r_grid: Sequence[float],
	*,
	tie_tol: float = DEFAULT_TIE_TOL,
	threads: Optional[int] = None,
) -> ConvergenceScan:
	"""Scan the softmax-to-hardmax gap over sampled directions A and scales r.

	``contexts`` is ``(N, n, d)``; ``sphere`` is a sampler of dimension d^2 or an
	explicit ``(k, d, d)`` array of unit-norm matrices.
	"""

	Xc = np.asarray(contexts, dtype=np.float64)
	if Xc.ndim != 3 or Xc.shape[0] == 0:
		raise ValueError(f"contexts must be a non-empty (N, n, d) array, got shape {Xc.shape}")
	d = Xc.shape[2]
	r = check_r_grid(r_grid)
	As = sphere.matrices(d) if isinstance(sphere, SphereSampler) else np.asarray(sphere, dtype=np.float64).reshape(-1, d, d)
	results = ordered_map(lambda A: direction_gaps(A, Xc, r, tie_tol), list(As), threads)
	gaps = np.array([res[0] for res in results])
	errs = np.array([res[1] for res in results])
	hull = all(res[2] for res in results)
	argsup = np.argmax(gaps, axis=0)
	cols = np.arange(r.shape[0])
	scan = ConvergenceScan(
		r_grid=r,
		sup_gaps=gaps[argsup, cols],
		sup_stderr=errs[argsup, cols],
		argsup=argsup,
		gaps=gaps,
		stderr=errs,
		hull_ok=hull,
		n_contexts=int(Xc.shape[0]),
	)
	if not hull:
		logger.warning("Softmax weights left the simplex on scan data")
	logger.info("Hardmax scan: sup gaps %s over %d directions", np.array2string(scan.sup_gaps, precision=4), scan.n_directions)
	return scan
