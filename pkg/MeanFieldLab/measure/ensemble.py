"""Uniform empirical measures on parameter space Ω = R^{d_w} × R^{d_θ}.

An :class:`Ensemble` stores the m particles as two read-only float64 arrays
(``w`` of shape (m, d_w), ``theta`` of shape (m, d_θ)). Everything here is a
pure function of its inputs; ensembles are values and safe to share between
threads.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from ..core import DimensionMismatch

logger = logging.getLogger(__name__)

INIT_KINDS = ("gaussian", "uniform-ball", "product", "point-mass")

# ψ2 norm of a unit point mass: exp(1/c²) = 2.
PSI2_POINT_MASS = 1.0 / math.sqrt(math.log(2.0))


class InvalidEnsemble(ValueError):
	"""Particles are missing, non-finite, or of inconsistent dimensions."""


def _frozen(a: np.ndarray) -> np.ndarray:
	out = np.array(a, dtype=np.float64, copy=True)
	out.setflags(write=False)
	return out


@dataclass(frozen=True)
class Particle:
	w: np.ndarray
	theta: np.ndarray

	def __post_init__(self) -> None:
		object.__setattr__(self, "w", _frozen(np.atleast_1d(self.w)))
		object.__setattr__(self, "theta", _frozen(np.atleast_1d(self.theta)))
		if not (np.all(np.isfinite(self.w)) and np.all(np.isfinite(self.theta))):
			raise InvalidEnsemble("particle has non-finite coordinates")

	@property
	def u(self) -> np.ndarray:
		return np.concatenate([self.w, self.theta])


@dataclass(frozen=True, eq=False)
class Ensemble:
	"""The measure (1/m) Σ δ_{(w_i, θ_i)}."""

	w: np.ndarray
	theta: np.ndarray

	def __post_init__(self) -> None:
		w = np.asarray(self.w, dtype=np.float64)
		theta = np.asarray(self.theta, dtype=np.float64)
		if w.ndim != 2 or theta.ndim != 2:
			raise InvalidEnsemble(f"w and theta must be 2-D arrays, got shapes {w.shape} and {theta.shape}")
		if w.shape[0] != theta.shape[0]:
			raise InvalidEnsemble(f"w has {w.shape[0]} particles but theta has {theta.shape[0]}")
		if w.shape[0] < 1:
			raise InvalidEnsemble("an ensemble needs at least one particle")
		if w.shape[1] < 1 or theta.shape[1] < 1:
			raise InvalidEnsemble("d_w and d_theta must be positive")
		if not (np.all(np.isfinite(w)) and np.all(np.isfinite(theta))):
			raise InvalidEnsemble("ensemble has non-finite coordinates")
		object.__setattr__(self, "w", _frozen(w))
		object.__setattr__(self, "theta", _frozen(theta))

	@property
	def m(self) -> int:
		return int(self.w.shape[0])

	@property
	def d_w(self) -> int:
		return int(self.w.shape[1])

	@property
	def d_theta(self) -> int:
		return int(self.theta.shape[1])

	@property
	def dim(self) -> int:
		return self.d_w + self.d_theta

	def stacked(self) -> np.ndarray:
		"""Particles as rows u_i = (w_i, θ_i), shape (m, d_w + d_θ)."""
		return np.concatenate([self.w, self.theta], axis=1)

	@classmethod
	def from_stacked(cls, u: np.ndarray, d_w: int) -> "Ensemble":
		u = np.asarray(u, dtype=np.float64)
		if u.ndim != 2 or not 0 < d_w < u.shape[1]:
			raise InvalidEnsemble(f"cannot split array of shape {u.shape} at d_w={d_w}")
		return cls(u[:, :d_w], u[:, d_w:])

	@classmethod
	def from_particles(cls, particles: Sequence[Particle]) -> "Ensemble":
		if not particles:
			raise InvalidEnsemble("an ensemble needs at least one particle")
		return cls(np.stack([p.w for p in particles]), np.stack([p.theta for p in particles]))

	def particle(self, i: int) -> Particle:
		return Particle(self.w[i], self.theta[i])

	def particles(self) -> List[Particle]:
		return [self.particle(i) for i in range(self.m)]

	def head(self, k: int) -> "Ensemble":
		if not 1 <= k <= self.m:
			raise InvalidEnsemble(f"head({k}) out of range for m={self.m}")
		return Ensemble(self.w[:k], self.theta[:k])

	def permuted(self, perm: Sequence[int]) -> "Ensemble":
		idx = np.asarray(perm, dtype=np.intp)
		if sorted(idx.tolist()) != list(range(self.m)):
			raise InvalidEnsemble("permutation does not cover every particle exactly once")
		return Ensemble(self.w[idx], self.theta[idx])

	def same_as(self, other: "Ensemble") -> bool:
		"""Bitwise equality of the ordered particle arrays."""
		return (
			self.w.shape == other.w.shape
			and self.theta.shape == other.theta.shape
			and bool(np.array_equal(self.w, other.w))
			and bool(np.array_equal(self.theta, other.theta))
		)


@dataclass(frozen=True)
class InitSpec:
	"""How to draw an initial ensemble.

	``location`` has length d_w + d_θ (``None`` means the origin). ``product``
	draws the w block from ``w_spec`` and the θ block from ``theta_spec``; the
	sub-specs' own locations have lengths d_w and d_θ and their seeds are
	ignored in favor of the parent seed.
	"""

	kind: str
	d_w: int
	d_theta: int
	location: Optional[Sequence[float]] = None
	scale: float = 1.0
	seed: int = 0
	w_spec: Optional["InitSpec"] = field(default=None)
	theta_spec: Optional["InitSpec"] = field(default=None)

	def __post_init__(self) -> None:
		if self.kind not in INIT_KINDS:
			raise ValueError(f"unknown init kind {self.kind!r} (expected one of {', '.join(INIT_KINDS)})")
		if self.d_w < 1 or self.d_theta < 1:
			raise ValueError("d_w and d_theta must be positive")
		if not self.scale >= 0:
			raise ValueError(f"scale must be non-negative, got {self.scale!r}")
		if self.kind == "product" and (self.w_spec is None or self.theta_spec is None):
			raise ValueError("product init needs both w_spec and theta_spec")

	def to_dict(self) -> dict:
		out = {
			"kind": self.kind,
			"d_w": self.d_w,
			"d_theta": self.d_theta,
			"location": None if self.location is None else [float(x) for x in self.location],
			"scale": float(self.scale),
			"seed": int(self.seed),
		}
		if self.kind == "product":
			out["w_spec"] = self.w_spec.to_dict() if self.w_spec else None
			out["theta_spec"] = self.theta_spec.to_dict() if self.theta_spec else None
		return out

	@classmethod
	def from_dict(cls, data: dict) -> "InitSpec":
		sub = {}
		for key in ("w_spec", "theta_spec"):
			if isinstance(data.get(key), dict):
				sub[key] = cls.from_dict(data[key])
		return cls(
			kind=str(data["kind"]),
			d_w=int(data["d_w"]),
			d_theta=int(data["d_theta"]),
			location=data.get("location"),
			scale=float(data.get("scale", 1.0)),
			seed=int(data.get("seed", 0)),
			**sub,
		)


def _location(loc: Optional[Sequence[float]], dim: int, what: str) -> np.ndarray:
	if loc is None:
		return np.zeros(dim)
	arr = np.asarray(loc, dtype=np.float64).reshape(-1)
	if arr.shape[0] != dim:
		raise DimensionMismatch(f"{what} location length", dim, arr.shape[0])
	return arr


def _sample_block(kind: str, loc: np.ndarray, scale: float, m: int, rng: np.random.Generator) -> np.ndarray:
	dim = loc.shape[0]
	if kind == "point-mass":
		return np.broadcast_to(loc, (m, dim)).copy()
	if kind == "gaussian":
		return loc + scale * rng.standard_normal((m, dim))
	if kind == "uniform-ball":
		g = rng.standard_normal((m, dim))
		norms = np.linalg.norm(g, axis=1, keepdims=True)
		norms[norms == 0.0] = 1.0
		radii = scale * rng.random((m, 1)) ** (1.0 / dim)
		return loc + radii * g / norms
	raise ValueError(f"{kind!r} is not a block sampler")


def sample_ensemble(spec: InitSpec, m: int) -> Ensemble:
	"""m i.i.d. particles from ``spec``; bitwise deterministic given the seed."""

	if m < 1:
		raise ValueError(f"m must be at least 1, got {m}")
	rng = np.random.default_rng(spec.seed)
	if spec.kind == "product":
		assert spec.w_spec is not None and spec.theta_spec is not None
		w_loc = _location(spec.w_spec.location, spec.d_w, "w_spec")
		t_loc = _location(spec.theta_spec.location, spec.d_theta, "theta_spec")
		w = _sample_block(spec.w_spec.kind, w_loc, spec.w_spec.scale, m, rng)
		theta = _sample_block(spec.theta_spec.kind, t_loc, spec.theta_spec.scale, m, rng)
		return Ensemble(w, theta)
	loc = _location(spec.location, spec.d_w + spec.d_theta, "init")
	u = _sample_block(spec.kind, loc, spec.scale, m, rng)
	return Ensemble.from_stacked(u, spec.d_w)


def second_moment(ens: Ensemble) -> float:
	"""m₂(μ) = (1/m) Σ |u_i|²."""
	u = ens.stacked()
	return float(np.mean(np.sum(u * u, axis=1)))


def psi2_norm(ens: Ensemble, tol: float = 1e-10) -> float:
	"""Smallest c > 0 with (1/m) Σ exp(|u_i|²/c²) ≤ 2, to relative precision ``tol``.

	The constraint is evaluated in log space, so large radii do not overflow.
	"""

	if tol <= 0:
		raise ValueError("tol must be positive")
	sq = np.sum(ens.stacked() ** 2, axis=1)
	r_max = math.sqrt(float(np.max(sq)))
	if r_max == 0.0:
		return 0.0
	m = sq.shape[0]
	log2 = math.log(2.0)
	log_m = math.log(m)

	def feasible(c: float) -> bool:
		return float(logsumexp(sq / (c * c))) - log_m <= log2

	lo = r_max / math.sqrt(math.log(2.0 * m))
	hi = r_max / math.sqrt(log2 / m)
	while not feasible(hi):
		hi *= 2.0
	if feasible(lo):
		return lo
	while hi - lo > tol * hi:
		mid = 0.5 * (lo + hi)
		if feasible(mid):
			hi = mid
		else:
			lo = mid
	return hi


ParticleMap = Callable[[np.ndarray], np.ndarray]


def pushforward(ens: Ensemble, fn: ParticleMap, *, vectorized: bool = False) -> Ensemble:
	"""Apply ``fn`` to every stacked particle u = (w, θ), keeping order and weights.

	``fn`` maps a vector of length d_w + d_θ to a vector of the same length; with
	``vectorized=True`` it receives the whole (m, d_w + d_θ) array instead.
	"""

	u = ens.stacked()
	if vectorized:
		out = np.asarray(fn(u), dtype=np.float64)
	else:
		out = np.stack([np.asarray(fn(row), dtype=np.float64).reshape(-1) for row in u])
	if out.shape != u.shape:
		raise DimensionMismatch("pushforward image shape", u.shape, out.shape)
	if not np.all(np.isfinite(out)):
		bad = int(np.argmax(~np.all(np.isfinite(out), axis=1)))
		raise InvalidEnsemble(f"pushforward map produced non-finite values at particle {bad}")
	return Ensemble.from_stacked(out, ens.d_w)


def pushforward_psi2_bound(ens: Ensemble, growth: float, tol: float = 1e-10) -> float:
	"""Right side of ‖T#μ‖_ψ2 ≤ 2C·max(‖μ‖_ψ2, 1/√ln2) for maps with |T(u)| ≤ C(1 + |u|)."""
	return 2.0 * growth * max(psi2_norm(ens, tol), PSI2_POINT_MASS)


def replicate(ens: Ensemble, k: int) -> Ensemble:
	"""Repeat every particle k times; the measure is unchanged, the count is k·m."""
	if k < 1:
		raise ValueError("k must be at least 1")
	return Ensemble(np.repeat(ens.w, k, axis=0), np.repeat(ens.theta, k, axis=0))
