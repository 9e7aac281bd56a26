"""Input densities with a declared polynomial decay exponent p: |rho(x)| <= C (1 + |x|)^(-p).

Each density also supplies the proposal used to sample hyperplanes through the
origin: a law on R^k (k = dim - 1) whose pushforward by an orthonormal basis of
the hyperplane is the density's own section, up to normalization.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Any, Callable, Dict, Mapping, Optional

import numpy as np
from scipy.stats import multivariate_normal, multivariate_t, norm, t as student_t


class UndeclaredDecay(ValueError):
	"""A density without a usable decay exponent was passed to a surface-integral check."""


class Density(ABC):
	name = "density"
	decay_exponent: Optional[float] = None

	def __init__(self, dim: int) -> None:
		if dim < 1:
			raise ValueError(f"density dimension must be >= 1, got {dim}")
		self.dim = int(dim)

	@abstractmethod
	def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
		...

	@abstractmethod
	def logpdf(self, X: np.ndarray) -> np.ndarray:
		...

	def pdf(self, X: np.ndarray) -> np.ndarray:
		return np.exp(self.logpdf(X))

	def sample_antithetic(self, n: int, rng: np.random.Generator) -> np.ndarray:
		"""``n`` samples as +x / -x pairs (for centrally symmetric densities)."""

		half = self.sample((n + 1) // 2, rng)
		return np.vstack([half, -half])[:n]

	@abstractmethod
	def hyperplane_proposal(self) -> Any:
		"""Frozen scipy law on R^(dim-1) with ``rvs`` and ``logpdf`` (``None`` when dim = 1)."""

	def describe(self) -> Dict[str, Any]:
		return {"kind": self.name, "dim": self.dim, "decay_exponent": self.decay_exponent}


class GaussianDensity(Density):
	name = "gaussian"
	decay_exponent = math.inf

	def __init__(self, dim: int, scale: float = 1.0) -> None:
		super().__init__(dim)
		if scale <= 0:
			raise ValueError(f"scale must be positive, got {scale}")
		self.scale = float(scale)

	def sample(self, n, rng):
		return self.scale * rng.standard_normal((n, self.dim))

	def logpdf(self, X):
		X = np.atleast_2d(X)
		return np.sum(norm.logpdf(X, scale=self.scale), axis=1)

	def hyperplane_proposal(self):
		if self.dim == 1:
			return None
		return multivariate_normal(mean=np.zeros(self.dim - 1), cov=self.scale**2 * np.eye(self.dim - 1))

	def describe(self):
		return {**super().describe(), "scale": self.scale, "decay_exponent": "inf"}


class StudentDensity(Density):
	"""Multivariate t with ``df`` degrees of freedom; decays like |x|^-(dim + df)."""

	name = "student"

	def __init__(self, dim: int, df: float, scale: float = 1.0) -> None:
		super().__init__(dim)
		if df <= 0 or scale <= 0:
			raise ValueError(f"df and scale must be positive, got df={df}, scale={scale}")
		self.df = float(df)
		self.scale = float(scale)
		self.decay_exponent = float(dim) + self.df
		self._law = multivariate_t(loc=np.zeros(dim), shape=self.scale**2 * np.eye(dim), df=self.df)

	def sample(self, n, rng):
		return np.asarray(self._law.rvs(size=n, random_state=rng)).reshape(n, self.dim)

	def logpdf(self, X):
		X = np.atleast_2d(X)
		if self.dim == 1:
			return student_t.logpdf(X[:, 0], df=self.df, scale=self.scale)
		return np.atleast_1d(self._law.logpdf(X))

	def hyperplane_proposal(self):
		if self.dim == 1:
			return None
		return multivariate_t(loc=np.zeros(self.dim - 1), shape=self.scale**2 * np.eye(self.dim - 1), df=self.df)

	def describe(self):
		return {**super().describe(), "df": self.df, "scale": self.scale}


class CustomDensity(Density):
	"""User-supplied sampler and log-density; the decay exponent must be declared explicitly."""

	name = "custom"

	def __init__(
		self,
		dim: int,
		sampler: Callable[[int, np.random.Generator], np.ndarray],
		logpdf: Callable[[np.ndarray], np.ndarray],
		*,
		decay_exponent: Optional[float] = None,
		proposal_scale: float = 1.0,
	) -> None:
		super().__init__(dim)
		self._sampler = sampler
		self._logpdf = logpdf
		self.decay_exponent = decay_exponent
		self.proposal_scale = float(proposal_scale)

	def sample(self, n, rng):
		return np.asarray(self._sampler(n, rng), dtype=np.float64).reshape(n, self.dim)

	def logpdf(self, X):
		return np.asarray(self._logpdf(np.atleast_2d(X)), dtype=np.float64)

	def hyperplane_proposal(self):
		if self.dim == 1:
			return None
		return multivariate_t(loc=np.zeros(self.dim - 1), shape=self.proposal_scale**2 * np.eye(self.dim - 1), df=3.0)


def require_decay(density: Density, d_in: int) -> float:
	"""The declared exponent p, which must exceed ``d_in``."""

	p = density.decay_exponent
	if p is None:
		raise UndeclaredDecay(f"density {density.name!r} declares no decay exponent")
	if not p > d_in:
		raise UndeclaredDecay(f"decay exponent {p} of {density.name!r} does not exceed d_in = {d_in}")
	return float(p)


def sample_proposal(proposal: Any, k: int, n: int, rng: np.random.Generator) -> np.ndarray:
	"""``(n, k)`` draws from a hyperplane proposal; ``k = 0`` gives empty rows."""

	if k == 0:
		return np.zeros((n, 0))
	return np.asarray(proposal.rvs(size=n, random_state=rng)).reshape(n, k)


def proposal_logpdf(proposal: Any, Y: np.ndarray) -> np.ndarray:
	if Y.shape[1] == 0:
		return np.zeros(Y.shape[0])
	return np.atleast_1d(proposal.logpdf(Y)).reshape(Y.shape[0])


def density_from_config(section: Mapping[str, Any], dim: int) -> Density:
	kind = section.get("kind", "gaussian")
	if kind == "gaussian":
		return GaussianDensity(dim, float(section.get("scale", 1.0)))
	if kind == "student":
		return StudentDensity(dim, float(section.get("df", 3.0)), float(section.get("scale", 1.0)))
	raise UndeclaredDecay(f"density kind {kind!r} has no declared decay exponent (use 'gaussian' or 'student')")
