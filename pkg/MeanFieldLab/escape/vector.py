"""Stable sets for vector fields (d_w > 1).

The refined condition compares how far J J^T v tilts away from v on the
boundary of K = {<g, v> <= -eta} with how well g aligns with v inside K. When
it holds, the cone A = {theta in K, <v, w>/|w| >= delta} is invariant. Near a
nondegenerate maximizer of |g|^2 the condition reduces to two constants of the
local Jacobian and Hessian.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import minimize

from ..workers import ordered_map
from .fields import FieldG, sup_norms
from .levelset import ray_boundary_points
from .ode import EscapeTrajectory, escape_ode_run
from .perturbations import Perturbation

logger = logging.getLogger(__name__)

DEGENERATE_FLOOR = 1e-12
MARGIN_GUARD = 1e-6
C2_STARTS = 16
C2_MESH = 100_000
ALIGNED_TOL = 1e-12
SPEED_FLOOR_RULE = "eta*(delta*gamma - sqrt((1-delta^2)(1-gamma^2))) - eps"


class PreconditionError(ValueError):
	"""Inputs violate a hypothesis of the local construction (H not SPD, J^T J not below H)."""


def _unit(v) -> np.ndarray:
	v = np.asarray(v, dtype=np.float64).reshape(-1)
	n = float(np.linalg.norm(v))
	if n == 0.0:
		raise ValueError("v must be nonzero")
	return v / n


def _pairing(g: FieldG, v: np.ndarray):
	return lambda P: np.asarray(g.value_batch(np.atleast_2d(P))) @ v


def sample_K(
	g: FieldG,
	v: np.ndarray,
	eta: float,
	n: int,
	rng: np.random.Generator,
	*,
	center: Optional[np.ndarray] = None,
	theta_scale: float = 2.0,
) -> np.ndarray:
	"""Up to ``n`` points of K by rejection from a Gaussian around ``center``."""

	c = np.zeros(g.d_theta) if center is None else np.asarray(center, dtype=np.float64)
	pair = _pairing(g, v)
	found: List[np.ndarray] = []
	if pair(c[None, :])[0] <= -eta:
		found.append(c.copy())
	for _ in range(20):
		cand = c + theta_scale * rng.standard_normal((4 * n, g.d_theta))
		found.extend(cand[pair(cand) <= -eta][: n - len(found)])
		if len(found) >= n:
			break
	return np.array(found[:n]) if found else np.empty((0, g.d_theta))


@dataclass
class CondCheckResult:
	lhs: float
	rhs: float
	margin: float
	passed: bool
	verdict: str
	reason: str = ""
	beta: Optional[float] = None
	delta_window: Optional[Tuple[float, float]] = None
	n_K: int = 0
	n_boundary: int = 0
	degenerate: List[List[float]] = field(default_factory=list)
	K_points: np.ndarray = field(default_factory=lambda: np.empty((0, 0)), repr=False)

	def to_dict(self) -> Dict[str, Any]:
		return {
			"lhs": self.lhs,
			"rhs": self.rhs,
			"margin": self.margin,
			"pass": self.passed,
			"verdict": self.verdict,
			"reason": self.reason,
			"beta": self.beta,
			"delta_window": None if self.delta_window is None else list(self.delta_window),
			"n_K": self.n_K,
			"n_boundary": self.n_boundary,
			"degenerate": self.degenerate,
		}


def cond_refined_check(
	g: FieldG,
	v,
	eta: float,
	*,
	n_samples: int = 1000,
	theta_scale: float = 2.0,
	seed: int = 0,
	center: Optional[np.ndarray] = None,
	K_points: Optional[np.ndarray] = None,
	boundary_points: Optional[np.ndarray] = None,
) -> CondCheckResult:
	"""Monte-Carlo estimate of sup over dK of the tilt of J J^T v against
	inf over K of |<g, v>| / |g|.

	Passes when lhs + MARGIN_GUARD < rhs. A boundary sample where J J^T v
	vanishes makes the check inconclusive; those samples are listed.
	"""

	v = _unit(v)
	if v.shape[0] != g.d_w:
		raise ValueError(f"v has length {v.shape[0]}, field has d_w = {g.d_w}")
	rng = np.random.default_rng(seed)
	pair = _pairing(g, v)
	if K_points is None:
		K_points = sample_K(g, v, eta, n_samples, rng, center=center, theta_scale=theta_scale)
	if K_points.shape[0] == 0:
		return CondCheckResult(math.nan, math.nan, MARGIN_GUARD, False, "INCONCLUSIVE", "K is empty on samples")
	if boundary_points is None:
		boundary_points = ray_boundary_points(lambda P: pair(P) + eta, K_points, n_samples, rng, scale=theta_scale).points

	vals = g.value_batch(K_points)
	norms = np.linalg.norm(vals, axis=1)
	rhs = float(np.min(np.abs(vals @ v) / norms))

	if boundary_points.shape[0] == 0:
		logger.warning("Refined condition: no boundary points of K found (K may be the whole space)")
		return CondCheckResult(
			math.nan, rhs, MARGIN_GUARD, False, "INCONCLUSIVE", "no boundary points", n_K=int(K_points.shape[0]), K_points=K_points
		)
	tilts = []
	betas = []
	degenerate = []
	for theta in boundary_points:
		J = g.jacobian(theta)
		jv = J.T @ v
		jjv = J @ jv
		n = float(np.linalg.norm(jjv))
		betas.append(float(np.linalg.norm(jv)))
		if n < DEGENERATE_FLOOR:
			degenerate.append([float(x) for x in theta])
			continue
		tilts.append(float(np.linalg.norm(jjv - float(jjv @ v) * v)) / n)
	lhs = float(max(tilts)) if tilts else math.nan
	result = CondCheckResult(
		lhs=lhs,
		rhs=rhs,
		margin=MARGIN_GUARD,
		passed=False,
		verdict="INCONCLUSIVE",
		beta=float(min(betas)),
		n_K=int(K_points.shape[0]),
		n_boundary=int(boundary_points.shape[0]),
		degenerate=degenerate,
		K_points=K_points,
	)
	if degenerate:
		result.reason = f"|J J^T v| below {DEGENERATE_FLOOR:g} at {len(degenerate)} boundary samples"
		logger.warning("Refined condition inconclusive: %s", result.reason)
		return result
	result.passed = lhs + MARGIN_GUARD < rhs
	result.verdict = "PASS" if result.passed else "FAIL"
	if result.passed:
		result.delta_window = (lhs, rhs)
	logger.info("Refined condition: lhs=%.6g rhs=%.6g -> %s", lhs, rhs, result.verdict)
	return result


@dataclass
class StableSetVector:
	"""A = {theta : <g(theta), v> <= -eta} x {w : <v, w>/|w| >= delta}."""

	v: np.ndarray
	eta: float
	delta: float
	epsilon: float
	beta: float
	gamma_prime: float
	gamma: float

	def speed_floor(self, epsilon: Optional[float] = None) -> float:
		"""Guaranteed d/dt |w| on A under perturbations of size ``epsilon``.

		d/dt |w| = <w/|w|, -g_t>. Splitting w/|w| and -g along v and its
		complement, cos(w, v) >= delta, <-g, v> >= eta and |<g, v>|/|g| >= gamma
		give eta * (delta * gamma - sqrt((1 - delta^2)(1 - gamma^2))) - epsilon.
		For g parallel to v (gamma = 1) this is eta * delta - epsilon.
		"""

		eps = self.epsilon if epsilon is None else epsilon
		cos_sum = self.delta * self.gamma - math.sqrt(max(0.0, (1.0 - self.delta**2) * (1.0 - self.gamma**2)))
		return self.eta * cos_sum - eps

	@property
	def aligned(self) -> bool:
		"""g is parallel to v on K, so the floor is exactly eta * delta - epsilon."""

		return self.gamma >= 1.0 - ALIGNED_TOL

	def in_K(self, g: FieldG, thetas: np.ndarray) -> np.ndarray:
		return np.asarray(g.value_batch(np.atleast_2d(thetas))) @ self.v <= -self.eta

	def alignment(self, ws: np.ndarray) -> np.ndarray:
		ws = np.atleast_2d(ws)
		return (ws @ self.v) / np.linalg.norm(ws, axis=1)

	def to_dict(self) -> Dict[str, Any]:
		return {
			"v": self.v.tolist(),
			"eta": self.eta,
			"delta": self.delta,
			"epsilon": self.epsilon,
			"beta": self.beta,
			"gamma_prime": self.gamma_prime,
			"gamma": self.gamma,
			"speed_floor": self.speed_floor(),
			"speed_floor_unperturbed": self.speed_floor(0.0),
			"speed_floor_rule": SPEED_FLOOR_RULE,
			"eta_delta": self.eta * self.delta,
			"aligned": self.aligned,
		}


def stable_set_from_check(result: CondCheckResult, v, eta: float) -> StableSetVector:
	"""Place delta halfway (in angle) through the window and derive the budget epsilon."""

	if not result.passed or result.delta_window is None or result.beta is None:
		raise PreconditionError(f"refined condition did not pass ({result.verdict}: {result.reason})")
	gp, gm = result.delta_window
	a_lo, a_hi = math.asin(min(1.0, gp)), math.asin(min(1.0, gm))
	delta = math.sin(0.5 * (a_lo + a_hi))
	a_d = math.asin(delta)
	eps = min(result.beta * math.sin(a_d - a_lo), eta * math.sin(a_hi - a_d))
	return StableSetVector(_unit(v), float(eta), delta, eps, result.beta, gp, gm)


def sample_stable_set(
	cert: StableSetVector,
	K_points: np.ndarray,
	n: int,
	rng: np.random.Generator,
	*,
	w_scale: Tuple[float, float] = (0.5, 2.0),
) -> List[Tuple[np.ndarray, np.ndarray]]:
	"""Initial conditions in A: theta drawn from K samples, cos(w, v) = delta + (1 - delta) U."""

	if K_points.shape[0] == 0:
		return []
	d_w = cert.v.shape[0]
	starts = []
	for _ in range(n):
		theta = K_points[rng.integers(K_points.shape[0])]
		cos = cert.delta + (1.0 - cert.delta) * rng.uniform()
		if d_w == 1:
			direction = cert.v.copy()
		else:
			e = rng.standard_normal(d_w)
			e -= float(e @ cert.v) * cert.v
			e /= np.linalg.norm(e)
			direction = cos * cert.v + math.sqrt(max(0.0, 1.0 - cos * cos)) * e
		starts.append((rng.uniform(*w_scale) * direction, theta.copy()))
	return starts


@dataclass
class StableTrial:
	index: int
	perturbation: Dict[str, Any]
	outside_A: bool
	left_K: bool
	min_alignment: float
	min_speed: float
	speed_floor: float
	trajectory: EscapeTrajectory = field(repr=False)

	def ok(self, delta: float, tol: float) -> bool:
		return (not self.left_K) and self.min_alignment >= delta - tol and self.min_speed >= self.speed_floor - tol

	def to_dict(self) -> Dict[str, Any]:
		return {
			"index": self.index,
			"perturbation": self.perturbation,
			"outside_A": self.outside_A,
			"left_K": self.left_K,
			"min_alignment": self.min_alignment,
			"min_speed": self.min_speed,
			"speed_floor": self.speed_floor,
		}


@dataclass
class StableSetReport:
	cert: StableSetVector
	tolerance: float
	trials: List[StableTrial]
	verdict: str

	@property
	def valid(self) -> List[StableTrial]:
		return [t for t in self.trials if not t.outside_A]

	@property
	def speed_floor_met(self) -> bool:
		"""Every valid trial kept d/dt |w| above its own floor (epsilon subtracted when perturbed)."""

		return all(t.min_speed >= t.speed_floor - self.tolerance for t in self.valid)

	@property
	def min_speed_margin(self) -> Optional[float]:
		return min((t.min_speed - t.speed_floor for t in self.valid), default=None)

	def to_dict(self) -> Dict[str, Any]:
		valid = self.valid
		return {
			"certificate": self.cert.to_dict(),
			"tolerance": self.tolerance,
			"verdict": self.verdict,
			"n_trials": len(self.trials),
			"n_outside_A": len(self.trials) - len(valid),
			"min_alignment": min((t.min_alignment for t in valid), default=None),
			"min_speed": min((t.min_speed for t in valid), default=None),
			"speed_floor_met": self.speed_floor_met,
			"min_speed_margin": self.min_speed_margin,
			"trials": [t.to_dict() for t in self.trials],
		}


def verify_stable_set_vector(
	g: FieldG,
	cert: StableSetVector,
	starts: Sequence[Tuple[np.ndarray, np.ndarray]],
	perturbations: Sequence[Perturbation] | Perturbation,
	*,
	t_end: float,
	step_size: float = 0.01,
	record_every: int = 1,
	tolerance: float = 1e-6,
	threads: Optional[int] = None,
) -> StableSetReport:
	"""Integrate from each start and check theta stays in K, the alignment stays
	above delta and |w| grows at least at the guaranteed speed.

	Starts outside A are flagged and excluded from the verdict.
	"""

	if isinstance(perturbations, Perturbation):
		perturbations = [perturbations] * len(starts)
	if len(perturbations) != len(starts):
		raise ValueError(f"{len(perturbations)} perturbations for {len(starts)} starts")

	def run(item) -> StableTrial:
		index, (w0, theta0), pert = item
		w0 = np.asarray(w0, dtype=np.float64)
		theta0 = np.asarray(theta0, dtype=np.float64)
		outside = bool(
			not cert.in_K(g, theta0[None, :])[0] or float(cert.alignment(w0[None, :])[0]) < cert.delta - tolerance
		)
		traj = escape_ode_run(g, pert, w0, theta0, t_end=t_end, step_size=step_size, record_every=record_every)
		return StableTrial(
			index=index,
			perturbation=pert.describe(),
			outside_A=outside,
			left_K=bool(not np.all(cert.in_K(g, traj.theta))),
			min_alignment=float(np.min(cert.alignment(traj.w))),
			min_speed=float(np.min(traj.speed)),
			speed_floor=cert.speed_floor(pert.epsilon if pert.kind != "none" else 0.0),
			trajectory=traj,
		)

	trials = ordered_map(run, [(i, s, p) for i, (s, p) in enumerate(zip(starts, perturbations))], threads)
	valid = [t for t in trials if not t.outside_A]
	if len(valid) < len(trials):
		logger.warning("%d of %d starts lie outside A and are excluded", len(trials) - len(valid), len(trials))
	if not valid:
		verdict = "INCONCLUSIVE"
	else:
		verdict = "PASS" if all(t.ok(cert.delta, tolerance) for t in valid) else "FAIL"
	logger.info("Stable set verification over %d valid trials -> %s", len(valid), verdict)
	return StableSetReport(cert, float(tolerance), trials, verdict)


@dataclass(frozen=True)
class LocalConstants:
	c1: float
	c2: float
	passed: bool
	c2_optimizer: float
	c2_mesh: Optional[float]

	def to_dict(self) -> Dict[str, Any]:
		return {"c1": self.c1, "c2": self.c2, "pass": self.passed, "c2_optimizer": self.c2_optimizer, "c2_mesh": self.c2_mesh}


def _sphere_mesh(dim: int, n: int) -> np.ndarray:
	if dim == 1:
		return np.array([[1.0], [-1.0]])
	if dim == 2:
		t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
		return np.stack([np.cos(t), np.sin(t)], axis=1)
	# Fibonacci lattice on S^2.
	k = np.arange(n) + 0.5
	z = 1.0 - 2.0 * k / n
	phi = math.pi * (1.0 + math.sqrt(5.0)) * k
	s = np.sqrt(1.0 - z * z)
	return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def local_constants(J, H, *, seed: int = 0) -> LocalConstants:
	"""c1 = sup |Jx| and c2 = inf |Hx|^2 / |JHx| over the ellipsoid <Hx, x> = 1.

	Substituting x = H^{-1/2} z turns both into problems on the unit sphere:
	c1 is the top singular value of J H^{-1/2}; c2 minimizes z^T H z / |J H^{1/2} z|.
	"""

	J = np.atleast_2d(np.asarray(J, dtype=np.float64))
	H = np.atleast_2d(np.asarray(H, dtype=np.float64))
	d = H.shape[0]
	if H.shape != (d, d) or J.shape[1] != d:
		raise ValueError(f"incompatible shapes J {J.shape}, H {H.shape}")
	if not np.allclose(H, H.T, atol=1e-10 * max(1.0, float(np.max(np.abs(H))))):
		raise PreconditionError("H is not symmetric")
	H = 0.5 * (H + H.T)
	lam, Q = eigh(H)
	if float(lam[0]) <= 0.0:
		raise PreconditionError(f"H is not positive definite (smallest eigenvalue {lam[0]:.3g})")
	H_inv_half = (Q / np.sqrt(lam)) @ Q.T
	H_half = (Q * np.sqrt(lam)) @ Q.T
	M = H_inv_half @ J.T @ J @ H_inv_half
	c1 = math.sqrt(max(0.0, float(eigh(0.5 * (M + M.T), eigvals_only=True)[-1])))
	if c1 >= 1.0:
		raise PreconditionError(f"J^T J is not below H (c1 = {c1:.6g} >= 1): not a nondegenerate maximizer")

	B = J @ H_half

	def inverse_ratio(y: np.ndarray) -> float:
		z = y / np.linalg.norm(y)
		return -float(np.linalg.norm(B @ z)) / float(z @ H @ z)

	rng = np.random.default_rng(seed)
	best = 0.0
	for _ in range(C2_STARTS):
		y0 = rng.standard_normal(d)
		res = minimize(inverse_ratio, y0, method="Nelder-Mead" if d == 1 else "BFGS")
		best = max(best, -float(res.fun), -inverse_ratio(y0))
	c2_opt = math.inf if best == 0.0 else 1.0 / best
	c2_mesh = None
	if d <= 3:
		Z = _sphere_mesh(d, C2_MESH)
		ratio = np.linalg.norm(Z @ B.T, axis=1) / np.einsum("ij,jk,ik->i", Z, H, Z)
		mesh_best = float(np.max(ratio))
		c2_mesh = math.inf if mesh_best == 0.0 else 1.0 / mesh_best
		if c2_opt > 1.001 * c2_mesh:
			logger.warning("c2 optimizer (%.6g) above the mesh oracle (%.6g); using the mesh value", c2_opt, c2_mesh)
	c2 = c2_opt if c2_mesh is None else min(c2_opt, c2_mesh)
	return LocalConstants(c1, c2, bool(c1 < c2), c2_opt, c2_mesh)


@dataclass
class LocalMaximizer:
	theta: np.ndarray
	g_value: np.ndarray
	J: np.ndarray
	H: np.ndarray
	v: np.ndarray
	grad_norm: float

	def to_dict(self) -> Dict[str, Any]:
		return {
			"theta": self.theta.tolist(),
			"g": self.g_value.tolist(),
			"J": self.J.tolist(),
			"H": self.H.tolist(),
			"v": self.v.tolist(),
			"grad_norm": self.grad_norm,
		}


def local_maximizer(g: FieldG, theta0) -> LocalMaximizer:
	"""Local maximizer of 1/2 |g|^2 from ``theta0``, with J = J_g and H = -H_g[g] there."""

	def neg_half_sq(theta: np.ndarray) -> float:
		val = g.value(theta)
		return -0.5 * float(val @ val)

	def neg_grad(theta: np.ndarray) -> np.ndarray:
		return -(g.jacobian(theta).T @ g.value(theta))

	res = minimize(neg_half_sq, np.asarray(theta0, dtype=np.float64).reshape(-1), jac=neg_grad, method="BFGS", options={"gtol": 1e-10})
	theta = np.asarray(res.x, dtype=np.float64)
	gv = g.value(theta)
	if float(np.linalg.norm(gv)) == 0.0:
		raise PreconditionError("g vanishes at the located critical point")
	J = g.jacobian(theta)
	H = -g.hessian_vector(theta, gv)
	return LocalMaximizer(theta, gv, J, H, -gv / np.linalg.norm(gv), float(np.linalg.norm(J.T @ gv)))


@dataclass
class MaximizerConstruction:
	maximizer: LocalMaximizer
	constants: LocalConstants
	eta: float
	check: CondCheckResult
	cert: Optional[StableSetVector]

	def to_dict(self) -> Dict[str, Any]:
		return {
			"maximizer": self.maximizer.to_dict(),
			"local_constants": self.constants.to_dict(),
			"eta": self.eta,
			"refined_condition": self.check.to_dict(),
			"certificate": None if self.cert is None else self.cert.to_dict(),
		}


def stable_set_from_maximizer(
	g: FieldG,
	theta0,
	*,
	eta_fraction: float = 0.9,
	n_samples: int = 1000,
	theta_scale: float = 1.0,
	seed: int = 0,
) -> MaximizerConstruction:
	"""Stable set around a nondegenerate maximizer of |g|^2, at eta = eta_fraction * |g(theta*)|."""

	if not 0.0 < eta_fraction < 1.0:
		raise ValueError(f"eta_fraction must lie in (0, 1), got {eta_fraction}")
	mx = local_maximizer(g, theta0)
	consts = local_constants(mx.J, mx.H, seed=seed)
	eta = eta_fraction * float(np.linalg.norm(mx.g_value))
	check = cond_refined_check(g, mx.v, eta, n_samples=n_samples, theta_scale=theta_scale, seed=seed, center=mx.theta)
	cert = stable_set_from_check(check, mx.v, eta) if check.passed else None
	logger.info(
		"Maximizer at %s: c1=%.4g c2=%.4g, refined condition %s", np.array2string(mx.theta, precision=4), consts.c1, consts.c2, check.verdict
	)
	return MaximizerConstruction(mx, consts, eta, check, cert)


@dataclass
class NaiveDemoReport:
	eta: float
	epsilon: float
	w_norms: List[float]
	fractions: List[float]
	n_pairs: int

	def to_dict(self) -> Dict[str, Any]:
		return {
			"eta": self.eta,
			"epsilon": self.epsilon,
			"n_pairs": self.n_pairs,
			"rows": [{"w_norm": w, "unsigned_fraction": f} for w, f in zip(self.w_norms, self.fractions)],
		}


def naive_construction_demo(
	g: FieldG,
	eta: float,
	epsilon: float,
	w_norms: Sequence[float],
	*,
	n_directions: int = 32,
	n_per_direction: int = 32,
	theta_scale: float = 2.0,
	seed: int = 0,
) -> NaiveDemoReport:
	"""Failure mode of the sphere-valued set {<g(theta), w/|w|> <= -eta}.

	At sampled boundary pairs (v, theta) the certified decrease of <g, v> is
	|w| (|J^T v|^2 - |J| eps) + (|proj_{v perp} g|^2 - |g| eps) / |w|; the report
	gives, per |w|, the fraction of pairs where this cannot be signed.
	"""

	rng = np.random.default_rng(seed)
	norms = sup_norms(g, theta_scale=theta_scale, seed=seed)
	a_terms, b_terms = [], []
	for _ in range(n_directions):
		v = rng.standard_normal(g.d_w)
		v /= np.linalg.norm(v)
		interior = sample_K(g, v, eta, n_per_direction, rng, theta_scale=theta_scale)
		if interior.shape[0] == 0:
			continue
		pair = _pairing(g, v)
		pts = ray_boundary_points(lambda P: pair(P) + eta, interior, n_per_direction, rng, scale=theta_scale).points
		for theta in pts:
			J = g.jacobian(theta)
			gv = g.value(theta)
			proj = gv - float(gv @ v) * v
			a_terms.append(float(np.linalg.norm(J.T @ v)) ** 2 - norms.jacobian * epsilon)
			b_terms.append(float(proj @ proj) - norms.value * epsilon)
	a = np.array(a_terms)
	b = np.array(b_terms)
	fractions = []
	for w in w_norms:
		D = w * a + b / w
		fractions.append(float(np.mean(D <= 0.0)) if D.size else math.nan)
	return NaiveDemoReport(float(eta), float(epsilon), [float(w) for w in w_norms], fractions, int(a.size))
