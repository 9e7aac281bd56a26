"""Oracle suites behind ``selftest`` and the ``w2-selftest`` experiment.

Each suite returns a :class:`SuiteResult`; nothing here raises on a failed
check, the caller decides what a FAIL means.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List

import numpy as np

from .losses import LOSS_KINDS, LossSpec, Truncation, loss_grads, loss_values, xi, xi_double_prime, xi_prime
from .measure import Ensemble, w2_bruteforce, w2_exact, w2_sliced
from .models import d2softmax, dsoftmax

logger = logging.getLogger(__name__)

W2_TOL = 1e-12
LINE_TOL = 1e-10
LOSS_SLACK = 1e-12
# Sharp suprema of |d softmax . h|_1 / |h|_inf and |d^2 softmax . (h, h)|_1 / |h|_inf^2.
SOFTMAX_D1_SUP = 1.0
SOFTMAX_D2_SUP = 8.0 / (6.0 * math.sqrt(3.0))


@dataclass
class SuiteResult:
	name: str
	passed: bool
	detail: str
	metrics: Dict[str, Any] = field(default_factory=dict)

	@property
	def verdict(self) -> str:
		return "PASS" if self.passed else "FAIL"

	def line(self) -> str:
		return f"{self.verdict:4}  {self.name:18} {self.detail}"

	def to_dict(self) -> Dict[str, Any]:
		return {"name": self.name, "verdict": self.verdict, "detail": self.detail, **self.metrics}


def _random_ensemble(rng: np.random.Generator, m: int, d_w: int, d_theta: int) -> Ensemble:
	return Ensemble(rng.standard_normal((m, d_w)), rng.standard_normal((m, d_theta)))


def _line_ensemble(u: np.ndarray, s: np.ndarray) -> Ensemble:
	pts = s[:, None] * u[None, :]
	return Ensemble(pts[:, :1], pts[:, 1:])


def w2_oracle_suite(instances: int = 200, max_m: int = 6, dimension: int = 3, seed: int = 0) -> SuiteResult:
	"""Exact assignment W2 against permutation brute force, m cycling through 1..max_m.

	Also checks that the sliced estimator with the supporting direction is exact
	for ensembles on a line.
	"""

	if dimension < 2:
		raise ValueError("ensembles have at least two coordinates (d_w, d_theta >= 1)")
	rng = np.random.default_rng(seed)
	worst = 0.0
	worst_line = 0.0
	for i in range(instances):
		m = 1 + i % max_m
		a = _random_ensemble(rng, m, 1, dimension - 1)
		b = _random_ensemble(rng, m, 1, dimension - 1)
		worst = max(worst, abs(w2_exact(a, b) - w2_bruteforce(a, b)))
		u = rng.standard_normal(dimension)
		u /= np.linalg.norm(u)
		la = _line_ensemble(u, rng.standard_normal(m))
		lb = _line_ensemble(u, rng.standard_normal(m))
		worst_line = max(worst_line, abs(w2_sliced(la, lb, directions=u) - w2_exact(la, lb)))
	passed = worst <= W2_TOL and worst_line <= LINE_TOL
	detail = f"{instances} instances, m <= {max_m}: max |exact - brute| {worst:.2e}, line |sliced - exact| {worst_line:.2e}"
	return SuiteResult("w2-oracle", passed, detail, {"max_error": worst, "max_line_error": worst_line, "instances": instances})


def _softmax_draws(rng: np.random.Generator, n_draws: int, n_max: int = 8):
	for n in range(2, n_max + 1):
		k = n_draws // (n_max - 1)
		z = rng.normal(scale=rng.uniform(0.1, 3.0, size=(k, 1)), size=(k, n))
		h = np.where(rng.uniform(size=(k, 1)) < 0.5, rng.choice([-1.0, 1.0], size=(k, n)), rng.uniform(-1.0, 1.0, size=(k, n)))
		yield z, h


def softmax_bounds_suite(n_draws: int = 100_000, seed: int = 0) -> SuiteResult:
	"""First and second softmax differentials against the 2 and 6 bounds (in the |h|_inf scale)."""

	rng = np.random.default_rng(seed)
	max1 = 0.0
	max2 = 0.0
	for z, h in _softmax_draws(rng, n_draws):
		hinf = np.max(np.abs(h), axis=1)
		keep = hinf > 0
		r1 = np.sum(np.abs(dsoftmax(z, h)), axis=1)[keep] / hinf[keep]
		r2 = np.sum(np.abs(d2softmax(z, h)), axis=1)[keep] / hinf[keep] ** 2
		max1 = max(max1, float(np.max(r1, initial=0.0)))
		max2 = max(max2, float(np.max(r2, initial=0.0)))
	bounded = max1 <= 2.0 and max2 <= 6.0
	active = max1 >= 0.95 * SOFTMAX_D1_SUP and max2 >= 0.9 * SOFTMAX_D2_SUP
	detail = f"max ratios {max1:.4f} (bound 2, sup {SOFTMAX_D1_SUP:g}) and {max2:.4f} (bound 6, sup {SOFTMAX_D2_SUP:.4f})"
	return SuiteResult("softmax-bounds", bounded and active, detail, {"max_d1": max1, "max_d2": max2, "draws": n_draws})


def loss_inequality_suite(n_draws: int = 100_000, seed: int = 0) -> SuiteResult:
	"""|grad loss|^2 <= 2 loss for both losses on random predictions and labels."""

	rng = np.random.default_rng(seed)
	violations: Dict[str, int] = {}
	for kind in LOSS_KINDS:
		bad = 0
		for d_out in range(1 if kind == "square" else 2, 6):
			k = n_draws // 5
			spec = LossSpec(kind, d_out)
			z = 3.0 * rng.standard_normal((k, d_out))
			if kind == "square":
				y = 3.0 * rng.standard_normal((k, d_out))
			else:
				y = np.eye(d_out)[rng.integers(d_out, size=k)]
			g = loss_grads(spec, z, y)
			ell = loss_values(spec, z, y)
			bad += int(np.sum(np.sum(g * g, axis=1) > 2.0 * ell + LOSS_SLACK))
		violations[kind] = bad
	passed = not any(violations.values())
	detail = ", ".join(f"{k}: {v} violations" for k, v in violations.items())
	return SuiteResult("loss-inequality", passed, detail, {"violations": violations, "draws": n_draws})


def truncation_suite(alpha: float = 1.0, n_grid: int = 10_000) -> SuiteResult:
	"""Derivative bounds, knot smoothness and the midpoint value of the truncation xi."""

	t = Truncation(alpha)
	x = np.linspace(0.0, 3.0 * alpha, n_grid)
	d1 = np.asarray(xi_prime(t, x))
	d2 = np.asarray(xi_double_prime(t, x))
	h = 1e-9 * alpha
	knot_gap = 0.0
	for knot in (alpha, 2.0 * alpha):
		knot_gap = max(knot_gap, abs(xi(t, knot + h) - xi(t, knot - h)), abs(xi_prime(t, knot + h) - xi_prime(t, knot - h)))
	mid = abs(xi(t, 1.5 * alpha) - 13.0 * alpha / 8.0)
	checks = {
		"max_xi_prime": float(np.max(d1)),
		"max_abs_xi_double_prime": float(np.max(np.abs(d2))),
		"knot_gap": float(knot_gap),
		"midpoint_error": float(mid),
	}
	passed = (
		checks["max_xi_prime"] <= 1.5 + 1e-12
		and checks["max_abs_xi_double_prime"] <= 4.0 / alpha + 1e-9
		and knot_gap <= 1e-8
		and mid <= 1e-12
	)
	detail = (
		f"max xi' {checks['max_xi_prime']:.6f}, max |xi''| {checks['max_abs_xi_double_prime']:.6f}, "
		f"knot gap {knot_gap:.1e}, midpoint error {mid:.1e}"
	)
	return SuiteResult("truncation", passed, detail, checks)


SUITES: Dict[str, Callable[..., SuiteResult]] = {
	"w2-oracle": w2_oracle_suite,
	"softmax-bounds": softmax_bounds_suite,
	"loss-inequality": loss_inequality_suite,
	"truncation": truncation_suite,
}


def run_selftest(*, quick: bool = True, seed: int = 0) -> List[SuiteResult]:
	"""Every oracle suite; ``quick`` shrinks the random draws by a factor of ten."""

	scale = 10 if quick else 1
	results = [
		w2_oracle_suite(200 // scale if quick else 200, seed=seed),
		softmax_bounds_suite(100_000 // scale, seed=seed),
		loss_inequality_suite(100_000 // scale, seed=seed),
		truncation_suite(),
	]
	for res in results:
		logger.info("%s", res.line())
	return results
