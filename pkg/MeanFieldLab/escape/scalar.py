"""Escape sets for scalar fields (d_w = 1) and the escape-rate verifier.

The construction locates a regular level {g = -eta}, bounds the boundary
gradient, and returns a ledger of constants from which the perturbation budget
epsilon and the starting threshold w_min follow. Two shapes of sublevel set are
handled: bounded (a compact K) and unbounded (cones at infinity, controlled by
the sphere limit g_inf of the field).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..workers import ordered_map
from .fields import AsymptoticField, ConstantField, FieldG, sup_norms
from .levelset import probe_far_points, ray_boundary_points, sphere_level_points
from .ode import EscapeTrajectory, escape_ode_run
from .perturbations import Perturbation

logger = logging.getLogger(__name__)

REGULAR_GRAD_FLOOR = 1e-4
LINEARITY_TOL = 0.05
RATE_TOL = 1e-6
N_ETA_CANDIDATES = 9

LEDGER_KINDS = ("constant", "whole-space", "bounded", "unbounded")
RATE_MEASURES = ("half_sq", "speed")


class NoEscapeSet(RuntimeError):
	"""No escape set could be constructed; ``evidence`` lists what the search saw."""

	def __init__(self, reason: str, evidence: Optional[List[Dict[str, Any]]] = None) -> None:
		self.reason = reason
		self.evidence = list(evidence or [])
		super().__init__(reason)


@dataclass
class RegularValue:
	eta: float
	interior: np.ndarray
	boundary: np.ndarray
	min_grad: float
	escaped_rays: int

	@property
	def bounded(self) -> bool:
		return self.escaped_rays == 0

	def evidence(self) -> Dict[str, Any]:
		return {
			"eta": self.eta,
			"n_interior": int(self.interior.shape[0]),
			"n_boundary": int(self.boundary.shape[0]),
			"min_grad": self.min_grad,
			"escaped_rays": self.escaped_rays,
		}


@dataclass
class EscapeSetScalar:
	"""Constant ledger of a scalar escape set.

	K = {sign * g <= -eta}; A = {sign * w >= w_min} x K. Along A the guaranteed
	speed is |w'| >= w_rate and d/dt 1/2 |w|^2 >= eta. A constant field short-circuits
	to the open set A = {sign * w > 0} x R^d_theta, where only the speed bound
	w_rate = eta / 2 holds (``rate_of == "speed"``).
	"""

	eta: float
	sign: int
	kind: str
	epsilon: float
	w_rate: float
	w_min: float
	field_name: str
	d_theta: int
	beta: Optional[float] = None
	sup_value: Optional[float] = None
	sup_grad: Optional[float] = None
	sup_radial_grad: Optional[float] = None
	min_grad_sampled: Optional[float] = None
	n_boundary: int = 0
	rate_of: str = "half_sq"
	# Unbounded ledger.
	C_w: Optional[float] = None
	C_theta: Optional[float] = None
	alpha: Optional[float] = None
	C1: Optional[float] = None
	C2: Optional[float] = None
	tau: Optional[float] = None
	gamma_inf: Optional[float] = None
	beta_inf: Optional[float] = None
	sup_spherical_grad: Optional[float] = None
	c: Optional[float] = None
	r_bar: Optional[float] = None
	beta_2rbar: Optional[float] = None
	evidence: List[Dict[str, Any]] = field(default_factory=list)
	interior: np.ndarray = field(default_factory=lambda: np.empty((0, 0)), repr=False)

	def level(self, g: FieldG, thetas: np.ndarray) -> np.ndarray:
		"""sign * g at each row, so that K is {level <= -eta}."""

		return self.sign * np.asarray(g.value_batch(np.atleast_2d(thetas)))[:, 0]

	def in_K(self, g: FieldG, thetas: np.ndarray) -> np.ndarray:
		return self.level(g, thetas) <= -self.eta

	@property
	def guaranteed_rate(self) -> float:
		return self.w_rate if self.rate_of == "speed" else self.eta

	def describe_A(self) -> str:
		w = "R+*" if self.sign > 0 else "R-*"
		if self.kind == "constant":
			return f"{w} x R^{self.d_theta}"
		if self.kind == "whole-space":
			return f"{{sign*w >= {self.w_min:.6g}}} x R^{self.d_theta}"
		return f"{{sign*w >= {self.w_min:.6g}}} x {{sign*g <= {-self.eta:.6g}}}"

	def to_dict(self) -> Dict[str, Any]:
		out = {
			"eta": self.eta,
			"sign": self.sign,
			"kind": self.kind,
			"epsilon": self.epsilon,
			"w_rate": self.w_rate,
			"w_min": self.w_min,
			"escape_rate": self.guaranteed_rate,
			"rate_of": self.rate_of,
			"field": self.field_name,
			"A": self.describe_A(),
		}
		for key in (
			"beta", "sup_value", "sup_grad", "sup_radial_grad", "min_grad_sampled", "C_w", "C_theta",
			"alpha", "C1", "C2", "tau", "gamma_inf", "beta_inf", "sup_spherical_grad", "c", "r_bar", "beta_2rbar",
		):
			value = getattr(self, key)
			if value is not None:
				out[key] = value
		out["n_boundary"] = self.n_boundary
		out["evidence"] = list(self.evidence)
		return out


def _signed_batch(g: FieldG, sign: int) -> Callable[[np.ndarray], np.ndarray]:
	return lambda P: sign * np.asarray(g.value_batch(np.atleast_2d(P)))[:, 0]


def _grad_norms(g: FieldG, points: np.ndarray) -> np.ndarray:
	if points.shape[0] == 0:
		return np.empty(0)
	return np.array([float(np.linalg.norm(g.jacobian(p)[0])) for p in points])


def _field_is_zero(g: FieldG, samples: np.ndarray) -> bool:
	if g.declared_zero:
		return True
	vals = g.value_batch(samples)
	if np.any(vals != 0.0):
		return False
	return all(not np.any(g.jacobian(p)) for p in samples[:32])


def find_regular_value(
	g: FieldG,
	eta_search: Tuple[float, float],
	*,
	sign: int = 1,
	n_boundary: int = 1000,
	theta_scale: float = 2.0,
	rng: np.random.Generator,
	n_interior: int = 4000,
) -> Tuple[Optional[RegularValue], List[Dict[str, Any]]]:
	"""Scan eta over the search interval and keep the best-conditioned regular level.

	A level is accepted when the sampled minimum of |grad g| on it exceeds
	``REGULAR_GRAD_FLOOR``. This is sampled evidence, not a proof of regularity.
	"""

	lo, hi = float(eta_search[0]), float(eta_search[1])
	if not (0.0 < lo <= hi):
		raise ValueError(f"eta_search must satisfy 0 < lo <= hi, got {eta_search}")
	etas = [lo] if lo == hi else list(np.linspace(lo, hi, N_ETA_CANDIDATES))
	level = _signed_batch(g, sign)
	cand = theta_scale * rng.standard_normal((n_interior, g.d_theta))
	cand = np.vstack([np.zeros((1, g.d_theta)), cand])
	vals = level(cand)
	best: Optional[RegularValue] = None
	evidence: List[Dict[str, Any]] = []
	for eta in etas:
		interior = cand[vals < -eta]
		if interior.shape[0] == 0:
			evidence.append({"eta": eta, "n_interior": 0, "n_boundary": 0, "min_grad": None, "escaped_rays": 0})
			continue
		search = ray_boundary_points(lambda P, eta=eta: level(P) + eta, interior, n_boundary, rng, scale=theta_scale)
		grads = _grad_norms(g, search.points)
		min_grad = float(np.min(grads)) if grads.size else math.inf
		found = RegularValue(eta, interior, search.points, min_grad, search.escaped)
		evidence.append(found.evidence())
		if search.points.shape[0] > 0 and min_grad <= REGULAR_GRAD_FLOOR:
			logger.debug("eta=%.6g rejected: sampled min |grad g| = %.3g", eta, min_grad)
			continue
		if best is None or min_grad > best.min_grad:
			best = found
	return best, evidence


def _constant_ledger(g: ConstantField, sign: int) -> EscapeSetScalar:
	eta0 = abs(float(g.c[0]))
	eps = 0.5 * eta0
	return EscapeSetScalar(
		eta=eta0,
		sign=sign,
		kind="constant",
		epsilon=eps,
		w_rate=eta0 - eps,
		w_min=0.0,
		rate_of="speed",
		field_name=g.name,
		d_theta=g.d_theta,
		sup_value=eta0,
		sup_grad=0.0,
		sup_radial_grad=0.0,
		interior=np.zeros((1, g.d_theta)),
	)


def _bounded_ledger(g: FieldG, sign: int, rv: RegularValue, norms) -> EscapeSetScalar:
	eta = rv.eta
	beta = rv.min_grad
	eps = min(0.5 * eta, 0.5 * beta**2 / norms.jacobian)
	w_rate = eta - eps
	return EscapeSetScalar(
		eta=eta,
		sign=sign,
		kind="bounded",
		epsilon=eps,
		w_rate=w_rate,
		w_min=eta / w_rate,
		field_name=g.name,
		d_theta=g.d_theta,
		beta=beta,
		sup_value=norms.value,
		sup_grad=norms.jacobian,
		sup_radial_grad=norms.radial_jacobian,
		min_grad_sampled=beta,
		n_boundary=int(rv.boundary.shape[0]),
		interior=rv.interior,
	)


def _signed_asymptote(ginf: AsymptoticField, sign: int) -> AsymptoticField:
	if sign > 0:
		return ginf
	return AsymptoticField(
		ginf.dim,
		lambda phi: -ginf.value(phi),
		spherical_gradient_fn=lambda phi: -ginf.spherical_gradient(phi),
		sup_spherical_gradient=ginf.declared_sup_spherical_gradient,
	)


def _uniform_sphere(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
	z = rng.standard_normal((n, dim))
	return z / np.linalg.norm(z, axis=1, keepdims=True)


def _r_bar(
	g: FieldG,
	sign: int,
	ginf: AsymptoticField,
	phis: np.ndarray,
	value_tol: float,
	grad_tol: float,
) -> Optional[float]:
	"""Smallest radius of a geometric grid from which both approximation conditions hold
	on every larger grid radius."""

	grid = np.geomspace(1.0, 1e7, 141)
	ginf_vals = ginf.value_batch(phis)
	ginf_grads = np.array([ginf.spherical_gradient(p) for p in phis])
	ok = np.zeros(grid.shape[0], dtype=bool)
	for i, r in enumerate(grid):
		pts = r * phis
		dv = np.max(np.abs(sign * g.value_batch(pts)[:, 0] - ginf_vals))
		if dv > value_tol:
			continue
		worst = 0.0
		for p, phi, sg in zip(pts, phis, ginf_grads):
			grad = sign * g.jacobian(p)[0]
			tangent = grad - float(grad @ phi) * phi
			worst = max(worst, float(np.linalg.norm(r * tangent - sg)))
			if worst > grad_tol:
				break
		ok[i] = worst <= grad_tol
	if not ok[-1]:
		return None
	bad = np.flatnonzero(~ok)
	return float(grid[0] if bad.size == 0 else grid[bad[-1] + 1])


def _unbounded_ledger(
	g: FieldG,
	sign: int,
	rv: RegularValue,
	norms,
	ginf: AsymptoticField,
	rng: np.random.Generator,
	*,
	n_boundary: int,
	n_sphere: int = 512,
) -> EscapeSetScalar:
	eta = rv.eta
	dim = g.d_theta
	evidence = [rv.evidence()]
	ginf = _signed_asymptote(ginf, sign)

	sphere_pts = sphere_level_points(lambda P: ginf.value_batch(P) + eta, dim, 1.0, n_boundary, rng)
	if sphere_pts.shape[0] == 0:
		raise NoEscapeSet("the level set of the asymptotic field on the unit sphere is empty", evidence)
	beta_inf = float(min(np.linalg.norm(ginf.spherical_gradient(p)) for p in sphere_pts))
	if beta_inf <= REGULAR_GRAD_FLOOR:
		raise NoEscapeSet(f"asymptotic level is singular (min spherical gradient {beta_inf:.3g})", evidence)

	phis = _uniform_sphere(dim, 4 * n_sphere, rng)
	phi_vals = ginf.value_batch(phis)
	phi_grads = np.array([np.linalg.norm(ginf.spherical_gradient(p)) for p in phis])
	if ginf.declared_sup_spherical_gradient is not None:
		sup_sg = float(ginf.declared_sup_spherical_gradient)
	else:
		sup_sg = float(max(np.max(phi_grads), beta_inf))

	gamma = 0.25 * eta
	for _ in range(60):
		band = np.abs(phi_vals + eta) <= gamma
		if not np.any(band) or float(np.min(phi_grads[band])) >= 0.5 * beta_inf:
			break
		gamma *= 0.5
	gamma_inf = min(gamma, 0.25 * eta)

	C_w = norms.value + 1.0
	C_theta = max(norms.jacobian, norms.radial_jacobian)
	k = 1.0 / (2.0 * (4.0 + C_theta))
	alpha = (-1.0 + math.sqrt(1.0 + 2.0 * C_w * k)) / C_w
	C1 = 9.0 + C_w * (4.0 + C_theta) * alpha**2
	C2 = 2.0 * (4.0 + C_theta)
	tau = max(1.0, math.sqrt(eta * C1 / C2))
	c = min(gamma_inf, 3.0 * beta_inf**2 / (32.0 * C2) * math.log1p(alpha * C2 / C1))

	grad_budget = beta_inf**2 / (16.0 * sup_sg)
	approx_phis = np.vstack([phis[:n_sphere], sphere_pts[:n_sphere]])
	r_bar = _r_bar(
		g,
		sign,
		ginf,
		approx_phis,
		value_tol=min(0.25 * c, 0.25 * eta, gamma_inf),
		grad_tol=min(grad_budget, 0.25 * eta, 1.0),
	)
	if r_bar is None:
		raise NoEscapeSet("the field does not approach its asymptote on the radius grid", evidence)

	level = _signed_batch(g, sign)
	near = ray_boundary_points(lambda P: level(P) + eta, rv.interior, n_boundary, rng, max_radius=2.0 * r_bar)
	shell = sphere_level_points(lambda P: level(P) + eta, dim, 2.0 * r_bar, n_boundary, rng)
	pts = np.vstack([near.points, shell]) if shell.shape[0] else near.points
	if pts.shape[0] == 0:
		raise NoEscapeSet("no level points found within radius 2*r_bar", evidence)
	beta_2r = float(np.min(_grad_norms(g, pts)))
	if beta_2r <= REGULAR_GRAD_FLOOR * 1e-3:
		raise NoEscapeSet(f"level set is singular within radius 2*r_bar (min |grad g| {beta_2r:.3g})", evidence)

	eps = min(grad_budget, 0.25 * eta, 1.0 / r_bar, 0.5 * beta_2r**2 / norms.jacobian)
	# Excursions stay below -eta/2, so |w'| >= eta/2 - eps >= eta/4.
	w_rate = 0.25 * eta
	ledger = EscapeSetScalar(
		eta=eta,
		sign=sign,
		kind="unbounded",
		epsilon=eps,
		w_rate=w_rate,
		w_min=max(tau * r_bar, eta / w_rate),
		field_name=g.name,
		d_theta=dim,
		beta=beta_2r,
		sup_value=norms.value,
		sup_grad=norms.jacobian,
		sup_radial_grad=norms.radial_jacobian,
		min_grad_sampled=rv.min_grad,
		n_boundary=int(pts.shape[0]),
		C_w=C_w,
		C_theta=C_theta,
		alpha=alpha,
		C1=C1,
		C2=C2,
		tau=tau,
		gamma_inf=gamma_inf,
		beta_inf=beta_inf,
		sup_spherical_grad=sup_sg,
		c=c,
		r_bar=r_bar,
		beta_2rbar=beta_2r,
		evidence=evidence,
		interior=rv.interior,
	)
	return ledger


def build_escape_set_scalar(
	g: FieldG,
	eta_search: Tuple[float, float] = (1.0, 1.0),
	*,
	n_boundary: int = 1000,
	theta_scale: float = 2.0,
	seed: int = 0,
	asymptotic: Optional[AsymptoticField] = None,
) -> EscapeSetScalar:
	"""Construct K = {g <= -eta} and the constant ledger for a scalar field.

	Fields with nonnegative range are handled through -g, recorded as ``sign = -1``.
	Raises :class:`NoEscapeSet` when g vanishes or no regular level is found.
	"""

	if g.d_w != 1:
		raise ValueError(f"scalar escape sets need d_w = 1, got {g.d_w}")
	rng = np.random.default_rng(seed)
	probe = theta_scale * rng.standard_normal((512, g.d_theta))
	if _field_is_zero(g, probe):
		raise NoEscapeSet("g vanishes identically; every trajectory is constant")

	if isinstance(g, ConstantField):
		sign = 1 if g.c[0] < 0 else -1
		ledger = _constant_ledger(g, sign)
		logger.info("Constant field: A = %s, epsilon = %.6g", ledger.describe_A(), ledger.epsilon)
		return ledger

	sign = 1 if float(np.min(g.value_batch(probe))) < 0.0 else -1
	if sign < 0:
		logger.info("Field %s is nonnegative on samples; building the escape set of -g", g.name)
	rv, evidence = find_regular_value(
		g, eta_search, sign=sign, n_boundary=n_boundary, theta_scale=theta_scale, rng=rng
	)
	if rv is None:
		raise NoEscapeSet(f"no regular value found for eta in [{eta_search[0]}, {eta_search[1]}]", evidence)
	norms = sup_norms(g, theta_scale=theta_scale, seed=seed)

	if rv.boundary.shape[0] == 0:
		# Every ray stayed inside: check K is the whole space far out as well.
		level = _signed_batch(g, sign)
		far = probe_far_points(lambda P: level(P) + rv.eta, g.d_theta, 1e4 * theta_scale, 256, rng)
		if far < 256:
			raise NoEscapeSet("no boundary points found on rays but K is not the whole space", evidence)
		eps = 0.5 * rv.eta
		ledger = EscapeSetScalar(
			eta=rv.eta,
			sign=sign,
			kind="whole-space",
			epsilon=eps,
			w_rate=rv.eta - eps,
			w_min=rv.eta / (rv.eta - eps),
			field_name=g.name,
			d_theta=g.d_theta,
			sup_value=norms.value,
			sup_grad=norms.jacobian,
			sup_radial_grad=norms.radial_jacobian,
			evidence=evidence,
			interior=rv.interior,
		)
	elif rv.bounded:
		ledger = _bounded_ledger(g, sign, rv, norms)
		ledger.evidence = evidence
	else:
		if asymptotic is None and hasattr(g, "asymptote"):
			asymptotic = g.asymptote()
		if asymptotic is None:
			raise NoEscapeSet("the level set is unbounded and no asymptotic field was declared", evidence)
		ledger = _unbounded_ledger(g, sign, rv, norms, asymptotic, rng, n_boundary=n_boundary)
		ledger.evidence = evidence
	logger.info(
		"Escape set (%s) for %s at eta=%.6g: epsilon=%.6g, w_min=%.6g",
		ledger.kind,
		g.name,
		ledger.eta,
		ledger.epsilon,
		ledger.w_min,
	)
	return ledger


def sample_escape_set(
	ledger: EscapeSetScalar,
	g: FieldG,
	n: int,
	rng: np.random.Generator,
	*,
	theta_scale: float = 2.0,
) -> List[Tuple[np.ndarray, np.ndarray]]:
	"""Initial conditions in A: theta in K by rejection, w = sign * w_min * (1 + U).

	The open constant-field set (w_min = 0) draws w = sign * (1 - U), in (0, 1].
	"""

	d = ledger.d_theta
	thetas: List[np.ndarray] = []
	if ledger.kind in ("constant", "whole-space"):
		thetas = list(theta_scale * rng.standard_normal((n, d)))
	else:
		spread = theta_scale if ledger.r_bar is None else max(theta_scale, 3.0 * ledger.r_bar)
		for _ in range(50):
			cand = theta_scale * rng.standard_normal((4 * n, d))
			if ledger.r_bar is not None:
				dirs = _uniform_sphere(d, 4 * n, rng)
				cand = np.vstack([cand, dirs * rng.uniform(0.0, spread, size=(4 * n, 1))])
			inside = cand[ledger.in_K(g, cand)]
			thetas.extend(inside[: n - len(thetas)])
			if len(thetas) >= n:
				break
		while len(thetas) < n and ledger.interior.shape[0]:
			thetas.append(ledger.interior[rng.integers(ledger.interior.shape[0])])
	starts = []
	for theta in thetas[:n]:
		if ledger.w_min > 0.0:
			w0 = ledger.sign * ledger.w_min * (1.0 + rng.uniform())
		else:
			w0 = ledger.sign * (1.0 - rng.uniform())
		starts.append((np.array([w0]), np.asarray(theta, dtype=np.float64)))
	return starts


@dataclass
class EscapeTrial:
	index: int
	perturbation: Dict[str, Any]
	min_rate: float
	slope: float
	linear_residual: float
	linear_ok: bool
	left_K: Optional[bool]
	trajectory: EscapeTrajectory = field(repr=False)

	def to_dict(self) -> Dict[str, Any]:
		return {
			"index": self.index,
			"perturbation": self.perturbation,
			"min_rate": self.min_rate,
			"slope": self.slope,
			"linear_residual": self.linear_residual,
			"linear_ok": self.linear_ok,
			"left_K": self.left_K,
		}


@dataclass
class EscapeRateReport:
	eta: float
	tolerance: float
	trials: List[EscapeTrial]
	verdict: str
	rate_of: str = "half_sq"

	@property
	def min_rate(self) -> float:
		return min((t.min_rate for t in self.trials), default=math.nan)

	@property
	def k_exits(self) -> int:
		return sum(1 for t in self.trials if t.left_K)

	@property
	def linear_fraction(self) -> float:
		if not self.trials:
			return math.nan
		return sum(1 for t in self.trials if t.linear_ok) / len(self.trials)

	def to_dict(self) -> Dict[str, Any]:
		return {
			"eta": self.eta,
			"tolerance": self.tolerance,
			"rate_of": self.rate_of,
			"verdict": self.verdict,
			"min_rate": self.min_rate,
			"k_exits": self.k_exits,
			"linear_fraction": self.linear_fraction,
			"trials": [t.to_dict() for t in self.trials],
		}


def _linear_fit(traj: EscapeTrajectory) -> Tuple[float, float, bool]:
	t = traj.times
	nw = traj.w_norm
	if t.shape[0] < 3:
		return math.nan, math.nan, False
	slope, intercept = np.polyfit(t, nw, 1)
	resid = float(np.sqrt(np.mean((nw - (slope * t + intercept)) ** 2)))
	growth = float(nw[-1] - nw[0])
	rel = resid / growth if growth > 0 else math.inf
	return float(slope), rel, bool(rel <= LINEARITY_TOL)


def verify_escape_rate(
	g: FieldG,
	starts: Sequence[Tuple[np.ndarray, np.ndarray]],
	perturbations: Sequence[Perturbation] | Perturbation,
	eta: float,
	*,
	t_end: float,
	step_size: float = 0.01,
	record_every: int = 1,
	tolerance: float = RATE_TOL,
	in_K: Optional[Callable[[np.ndarray], np.ndarray]] = None,
	threads: Optional[int] = None,
	rate_of: str = "half_sq",
) -> EscapeRateReport:
	"""Integrate the reduced ODE from each start and test d/dt 1/2 |w|^2 >= eta
	(``rate_of="half_sq"``) or d/dt |w| >= eta (``rate_of="speed"``).

	``perturbations`` is either one family member for all trials or one per
	start. ``in_K`` (batched membership test) enables K-exit tracking.
	"""

	if rate_of not in RATE_MEASURES:
		raise ValueError(f"rate_of must be one of {RATE_MEASURES}, got {rate_of!r}")
	if isinstance(perturbations, Perturbation):
		perturbations = [perturbations] * len(starts)
	if len(perturbations) != len(starts):
		raise ValueError(f"{len(perturbations)} perturbations for {len(starts)} starts")

	def run(item: Tuple[int, Tuple[np.ndarray, np.ndarray], Perturbation]) -> EscapeTrial:
		index, (w0, theta0), pert = item
		traj = escape_ode_run(g, pert, w0, theta0, t_end=t_end, step_size=step_size, record_every=record_every)
		slope, resid, lin_ok = _linear_fit(traj)
		left = None if in_K is None else bool(not np.all(in_K(traj.theta)))
		observed = traj.speed if rate_of == "speed" else traj.rate
		return EscapeTrial(index, pert.describe(), float(np.min(observed)), slope, resid, lin_ok, left, traj)

	trials = ordered_map(run, [(i, s, p) for i, (s, p) in enumerate(zip(starts, perturbations))], threads)
	if not trials:
		verdict = "INCONCLUSIVE"
	else:
		verdict = "PASS" if all(t.min_rate >= eta - tolerance for t in trials) else "FAIL"
	report = EscapeRateReport(float(eta), float(tolerance), trials, verdict, rate_of)
	logger.info(
		"Escape rate at eta=%.6g over %d trials: min rate %.6g -> %s",
		eta,
		len(trials),
		report.min_rate,
		verdict,
	)
	return report


@dataclass
class Excursion:
	start_time: float
	end_time: Optional[float]
	radius: float
	regime: str
	max_level: float
	stays_below_half: bool
	reenters: bool

	def to_dict(self) -> Dict[str, Any]:
		return dict(self.__dict__)


@dataclass
class RegimeReport:
	excursions: List[Excursion]

	@property
	def ok(self) -> bool:
		"""Medium-regime excursions stay below -eta/2 and re-enter K."""

		return all(e.stays_below_half and e.reenters for e in self.excursions if e.regime == "medium")

	def counts(self) -> Dict[str, int]:
		out = {"small": 0, "medium": 0, "large": 0}
		for e in self.excursions:
			out[e.regime] += 1
		return out

	def to_dict(self) -> Dict[str, Any]:
		return {"ok": self.ok, "counts": self.counts(), "excursions": [e.to_dict() for e in self.excursions]}


def regime_bookkeeping(traj: EscapeTrajectory, ledger: EscapeSetScalar, g: FieldG) -> RegimeReport:
	"""Classify excursions out of K by |theta| at their start against r_bar."""

	if ledger.r_bar is None:
		raise ValueError("regime bookkeeping needs an unbounded ledger (r_bar)")
	levels = ledger.level(g, traj.theta)
	outside = levels > -ledger.eta
	r_bar = ledger.r_bar
	excursions: List[Excursion] = []
	i = 0
	n = levels.shape[0]
	while i < n:
		if not outside[i]:
			i += 1
			continue
		j = i
		while j < n and outside[j]:
			j += 1
		radius = float(np.linalg.norm(traj.theta[i]))
		if radius <= 2.0 * r_bar:
			regime = "small"
		elif radius <= 3.0 * r_bar:
			regime = "medium"
		else:
			regime = "large"
		peak = float(np.max(levels[i:j]))
		excursions.append(
			Excursion(
				start_time=float(traj.times[i]),
				end_time=float(traj.times[j]) if j < n else None,
				radius=radius,
				regime=regime,
				max_level=peak,
				stays_below_half=peak <= -0.5 * ledger.eta,
				reenters=bool(j < n and np.any(levels[j:] < -ledger.eta)),
			)
		)
		i = j
	return RegimeReport(excursions)
