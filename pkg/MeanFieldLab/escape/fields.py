"""Candidate limit fields g: R^{d_theta} -> R^{d_w} for the reduced escape dynamics.

A :class:`FieldG` provides ``value`` and ``jacobian`` (finite differences by
default) and a u-weighted Hessian. Closed-form fields declare their sup norms;
other fields get sampled estimates from :func:`sup_norms`.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Callable, Dict, Mapping, Optional

import numpy as np

from ..core import ConfigError
from ..losses import LossSpec, Truncation
from ..measure import Ensemble
from ..models import Dataset, ModelSpec

logger = logging.getLogger(__name__)

FD_STEP = 1e-6


class FieldG(ABC):
	"""Base class for escape fields.

	Subclasses implement :meth:`value`; override :meth:`jacobian`,
	:meth:`hessian_vector` and :meth:`value_batch` when closed forms exist.
	The ``declared_*`` attributes hold exact sup norms when known.
	"""

	name: str = "field"
	declared_sup_value: Optional[float] = None
	declared_sup_jacobian: Optional[float] = None
	declared_sup_radial_jacobian: Optional[float] = None
	declared_zero: bool = False

	def __init__(self, d_w: int, d_theta: int) -> None:
		self.d_w = int(d_w)
		self.d_theta = int(d_theta)

	@abstractmethod
	def value(self, theta: np.ndarray) -> np.ndarray:
		...

	def value_batch(self, thetas: np.ndarray) -> np.ndarray:
		thetas = np.atleast_2d(thetas)
		return np.stack([self.value(t) for t in thetas])

	def jacobian(self, theta: np.ndarray) -> np.ndarray:
		theta = np.asarray(theta, dtype=np.float64)
		h = FD_STEP * max(1.0, float(np.linalg.norm(theta)))
		cols = []
		for j in range(self.d_theta):
			e = np.zeros(self.d_theta)
			e[j] = h
			cols.append((self.value(theta + e) - self.value(theta - e)) / (2.0 * h))
		return np.stack(cols, axis=1)

	def hessian_vector(self, theta: np.ndarray, u: np.ndarray) -> np.ndarray:
		"""sum_k u_k Hess g_k(theta), a symmetric d_theta x d_theta matrix."""

		theta = np.asarray(theta, dtype=np.float64)
		u = np.asarray(u, dtype=np.float64)
		h = 1e-5 * max(1.0, float(np.linalg.norm(theta)))
		cols = []
		for j in range(self.d_theta):
			e = np.zeros(self.d_theta)
			e[j] = h
			cols.append((self.jacobian(theta + e).T @ u - self.jacobian(theta - e).T @ u) / (2.0 * h))
		H = np.stack(cols, axis=1)
		return 0.5 * (H + H.T)

	def describe(self) -> Dict[str, Any]:
		return {"name": self.name, "d_w": self.d_w, "d_theta": self.d_theta}


def hessian_vector_field(g: FieldG, theta: np.ndarray, u: np.ndarray) -> np.ndarray:
	return g.hessian_vector(np.asarray(theta, dtype=np.float64), np.asarray(u, dtype=np.float64))


def _as_unit(v, dim: int, what: str) -> np.ndarray:
	arr = np.asarray(v, dtype=np.float64).reshape(-1)
	if arr.shape[0] != dim:
		raise ValueError(f"{what} must have length {dim}, got {arr.shape[0]}")
	n = float(np.linalg.norm(arr))
	if n == 0.0:
		raise ValueError(f"{what} must be nonzero")
	return arr / n


class RadialBumpField(FieldG):
	"""Scalar g(theta) = -a / (1 + |theta|^2) - b."""

	name = "radial-bump"

	def __init__(self, d_theta: int = 2, amplitude: float = 1.0, offset: float = 0.5) -> None:
		super().__init__(1, d_theta)
		self.a = float(amplitude)
		self.b = float(offset)
		self.declared_sup_value = max(abs(self.a + self.b), abs(self.b))
		self.declared_sup_jacobian = 3.0 * math.sqrt(3.0) / 8.0 * abs(self.a)
		self.declared_sup_radial_jacobian = 0.5 * abs(self.a)

	def value(self, theta):
		s = float(np.dot(theta, theta))
		return np.array([-self.a / (1.0 + s) - self.b])

	def value_batch(self, thetas):
		s = np.sum(np.atleast_2d(thetas) ** 2, axis=1)
		return (-self.a / (1.0 + s) - self.b)[:, None]

	def jacobian(self, theta):
		theta = np.asarray(theta, dtype=np.float64)
		s = float(theta @ theta)
		return (2.0 * self.a * theta / (1.0 + s) ** 2)[None, :]

	def hessian_vector(self, theta, u):
		theta = np.asarray(theta, dtype=np.float64)
		s = float(theta @ theta)
		H = 2.0 * self.a * np.eye(self.d_theta) / (1.0 + s) ** 2 - 8.0 * self.a * np.outer(theta, theta) / (1.0 + s) ** 3
		return float(np.asarray(u).reshape(-1)[0]) * H

	def describe(self):
		return {**super().describe(), "amplitude": self.a, "offset": self.b}


class ConstantField(FieldG):
	name = "constant"

	def __init__(self, value, d_theta: int = 1) -> None:
		c = np.atleast_1d(np.asarray(value, dtype=np.float64))
		super().__init__(c.shape[0], d_theta)
		self.c = c
		self.declared_sup_value = float(np.linalg.norm(c))
		self.declared_sup_jacobian = 0.0
		self.declared_sup_radial_jacobian = 0.0
		self.declared_zero = bool(np.all(c == 0.0))

	def value(self, theta):
		return self.c.copy()

	def value_batch(self, thetas):
		return np.broadcast_to(self.c, (np.atleast_2d(thetas).shape[0], self.d_w)).copy()

	def jacobian(self, theta):
		return np.zeros((self.d_w, self.d_theta))

	def hessian_vector(self, theta, u):
		return np.zeros((self.d_theta, self.d_theta))

	def describe(self):
		return {**super().describe(), "value": self.c.tolist()}


class ZeroField(ConstantField):
	name = "zero"

	def __init__(self, d_w: int = 1, d_theta: int = 1) -> None:
		super().__init__(np.zeros(d_w), d_theta)


class RadialAlignedField(FieldG):
	"""g(theta) = -h(|theta|) v with h(rho) = offset + amplitude / (1 + rho^2)."""

	name = "radial-aligned"

	def __init__(self, v, d_theta: int = 2, amplitude: float = 1.0, offset: float = 0.5) -> None:
		vv = np.asarray(v, dtype=np.float64).reshape(-1)
		super().__init__(vv.shape[0], d_theta)
		self.v = _as_unit(vv, self.d_w, "v")
		self.a = float(amplitude)
		self.b = float(offset)
		self.declared_sup_value = max(abs(self.a + self.b), abs(self.b))
		self.declared_sup_jacobian = 3.0 * math.sqrt(3.0) / 8.0 * abs(self.a)
		self.declared_sup_radial_jacobian = 0.5 * abs(self.a)

	def _h(self, s):
		return self.b + self.a / (1.0 + s)

	def value(self, theta):
		return -self._h(float(np.dot(theta, theta))) * self.v

	def value_batch(self, thetas):
		s = np.sum(np.atleast_2d(thetas) ** 2, axis=1)
		return -self._h(s)[:, None] * self.v[None, :]

	def jacobian(self, theta):
		theta = np.asarray(theta, dtype=np.float64)
		s = float(theta @ theta)
		grad_h = -2.0 * self.a * theta / (1.0 + s) ** 2
		return -np.outer(self.v, grad_h)

	def hessian_vector(self, theta, u):
		theta = np.asarray(theta, dtype=np.float64)
		s = float(theta @ theta)
		hess_h = -2.0 * self.a * np.eye(self.d_theta) / (1.0 + s) ** 2 + 8.0 * self.a * np.outer(theta, theta) / (1.0 + s) ** 3
		return -float(np.dot(self.v, u)) * hess_h

	def describe(self):
		return {**super().describe(), "v": self.v.tolist(), "amplitude": self.a, "offset": self.b}


class ArcField(FieldG):
	"""d_theta = 1, d_w = 2: g(theta) = -(1, tilt * tanh(theta)) / (1 + theta^2).

	|g|^2 has a nondegenerate maximum at theta = 0 with g(0) = (-1, 0).
	"""

	name = "arc"

	def __init__(self, tilt: float = 0.3) -> None:
		super().__init__(2, 1)
		self.tilt = float(tilt)
		self.declared_sup_value = math.sqrt(1.0 + self.tilt**2)

	def value(self, theta):
		t = float(np.asarray(theta).reshape(-1)[0])
		return -np.array([1.0, self.tilt * math.tanh(t)]) / (1.0 + t * t)

	def value_batch(self, thetas):
		t = np.atleast_2d(thetas)[:, 0]
		return -np.stack([np.ones_like(t), self.tilt * np.tanh(t)], axis=1) / (1.0 + t * t)[:, None]

	def jacobian(self, theta):
		t = float(np.asarray(theta).reshape(-1)[0])
		q = 1.0 + t * t
		sech2 = 1.0 / math.cosh(t) ** 2
		d1 = 2.0 * t / q**2
		d2 = -self.tilt * (sech2 / q - 2.0 * t * math.tanh(t) / q**2)
		return np.array([[d1], [d2]])

	def describe(self):
		return {**super().describe(), "tilt": self.tilt}


class TiltedSaturationField(FieldG):
	"""Scalar g(theta) = -offset - slope * <u, theta> / sqrt(1 + |theta|^2).

	Its sublevel sets are unbounded cones asymptotically; the sphere limit is
	g_inf(phi) = -offset - slope * <u, phi>.
	"""

	name = "tilted-saturation"

	def __init__(self, u, offset: float = 0.5, slope: float = 0.5) -> None:
		uu = np.asarray(u, dtype=np.float64).reshape(-1)
		super().__init__(1, uu.shape[0])
		self.u = _as_unit(uu, self.d_theta, "u")
		self.b = float(offset)
		self.a = float(slope)
		self.declared_sup_value = abs(self.b) + abs(self.a)
		self.declared_sup_jacobian = abs(self.a)
		self.declared_sup_radial_jacobian = abs(self.a)

	def value(self, theta):
		theta = np.asarray(theta, dtype=np.float64)
		return np.array([-self.b - self.a * float(self.u @ theta) / math.sqrt(1.0 + float(theta @ theta))])

	def value_batch(self, thetas):
		T = np.atleast_2d(thetas)
		return (-self.b - self.a * (T @ self.u) / np.sqrt(1.0 + np.sum(T * T, axis=1)))[:, None]

	def jacobian(self, theta):
		theta = np.asarray(theta, dtype=np.float64)
		q = 1.0 + float(theta @ theta)
		return (-self.a * (self.u / math.sqrt(q) - float(self.u @ theta) * theta / q**1.5))[None, :]

	def asymptote(self) -> "AsymptoticField":
		a, b, u = self.a, self.b, self.u
		return AsymptoticField(
			self.d_theta,
			lambda phi: -b - a * float(u @ phi),
			spherical_gradient_fn=lambda phi: -a * (u - float(u @ phi) * phi),
			sup_spherical_gradient=abs(a),
		)

	def describe(self):
		return {**super().describe(), "u": self.u.tolist(), "offset": self.b, "slope": self.a}


class CallableField(FieldG):
	"""User-supplied g with optional analytic Jacobian and Hessian-vector product."""

	name = "callable"

	def __init__(
		self,
		fn: Callable[[np.ndarray], np.ndarray],
		d_w: int,
		d_theta: int,
		*,
		jac: Optional[Callable[[np.ndarray], np.ndarray]] = None,
		hess: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
		sup_value: Optional[float] = None,
		sup_jacobian: Optional[float] = None,
		sup_radial_jacobian: Optional[float] = None,
	) -> None:
		super().__init__(d_w, d_theta)
		self._fn = fn
		self._jac = jac
		self._hess = hess
		self.declared_sup_value = sup_value
		self.declared_sup_jacobian = sup_jacobian
		self.declared_sup_radial_jacobian = sup_radial_jacobian

	def value(self, theta):
		return np.atleast_1d(np.asarray(self._fn(np.asarray(theta, dtype=np.float64)), dtype=np.float64))

	def jacobian(self, theta):
		if self._jac is None:
			return super().jacobian(theta)
		return np.asarray(self._jac(np.asarray(theta, dtype=np.float64)), dtype=np.float64).reshape(self.d_w, self.d_theta)

	def hessian_vector(self, theta, u):
		if self._hess is None:
			return super().hessian_vector(theta, u)
		return np.asarray(self._hess(np.asarray(theta, dtype=np.float64), np.asarray(u, dtype=np.float64)), dtype=np.float64)


class EnsembleField(FieldG):
	"""g_mu of a fixed ensemble, with the residual frozen at construction."""

	name = "ensemble"

	def __init__(
		self,
		ens: Ensemble,
		model: ModelSpec,
		data: Dataset,
		loss: LossSpec,
		truncation: Optional[Truncation] = None,
	) -> None:
		from ..flow.field import residual_arrays

		super().__init__(model.d_w, model.d_theta)
		self.model = model
		self.inputs = data.inputs
		self.residual = residual_arrays(ens.w, ens.theta, model, data, loss, truncation).residual

	def value(self, theta):
		return self.model.phi_adjoint(np.asarray(theta, dtype=np.float64), self.inputs, self.residual)

	def value_batch(self, thetas):
		return self.model.adjoint(np.atleast_2d(thetas), self.inputs, self.residual)

	def jacobian(self, theta):
		return self.model.adjoint_jacobian(np.asarray(theta, dtype=np.float64), self.inputs, self.residual)

	def hessian_vector(self, theta, u):
		return self.model.adjoint_hessian_vector(np.asarray(theta, dtype=np.float64), self.inputs, self.residual, u)


class AsymptoticField:
	"""Scalar limit g_inf on the unit sphere with its spherical gradient."""

	def __init__(
		self,
		dim: int,
		value_fn: Callable[[np.ndarray], float],
		*,
		spherical_gradient_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None,
		sup_spherical_gradient: Optional[float] = None,
	) -> None:
		self.dim = int(dim)
		self._value = value_fn
		self._grad = spherical_gradient_fn
		self.declared_sup_spherical_gradient = sup_spherical_gradient

	def value(self, phi: np.ndarray) -> float:
		return float(self._value(np.asarray(phi, dtype=np.float64)))

	def value_batch(self, phis: np.ndarray) -> np.ndarray:
		return np.array([self.value(p) for p in np.atleast_2d(phis)])

	def spherical_gradient(self, phi: np.ndarray) -> np.ndarray:
		phi = np.asarray(phi, dtype=np.float64)
		if self._grad is not None:
			return np.asarray(self._grad(phi), dtype=np.float64)
		# x -> g_inf(x/|x|) is 0-homogeneous, so its gradient at phi is already tangent.
		h = FD_STEP
		grad = np.empty(self.dim)
		for j in range(self.dim):
			e = np.zeros(self.dim)
			e[j] = h
			p, m = phi + e, phi - e
			grad[j] = (self.value(p / np.linalg.norm(p)) - self.value(m / np.linalg.norm(m))) / (2.0 * h)
		return grad - float(grad @ phi) * phi


@dataclass(frozen=True)
class SupNorms:
	value: float
	jacobian: float
	radial_jacobian: float
	sampled: bool

	def to_dict(self) -> Dict[str, Any]:
		return {"value": self.value, "jacobian": self.jacobian, "radial_jacobian": self.radial_jacobian, "sampled": self.sampled}


def sup_norms(g: FieldG, *, theta_scale: float = 2.0, n: int = 2000, seed: int = 0) -> SupNorms:
	"""Declared sup norms where available, otherwise maxima over Gaussian points and radial shells."""

	if g.declared_sup_value is not None and g.declared_sup_jacobian is not None and g.declared_sup_radial_jacobian is not None:
		return SupNorms(g.declared_sup_value, g.declared_sup_jacobian, g.declared_sup_radial_jacobian, False)
	rng = np.random.default_rng(seed)
	pts = theta_scale * rng.standard_normal((n, g.d_theta))
	dirs = rng.standard_normal((64, g.d_theta))
	dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
	radii = np.geomspace(1e-2, 1e4, 40)
	shell = (radii[:, None, None] * dirs[None, :, :]).reshape(-1, g.d_theta)
	allpts = np.vstack([pts, shell, np.zeros((1, g.d_theta))])
	vals = g.value_batch(allpts)
	jac_norms = np.array([np.linalg.norm(g.jacobian(t), 2) for t in allpts])
	radial = np.linalg.norm(allpts, axis=1) * jac_norms
	est = SupNorms(
		g.declared_sup_value if g.declared_sup_value is not None else float(np.max(np.linalg.norm(vals, axis=1))),
		g.declared_sup_jacobian if g.declared_sup_jacobian is not None else float(np.max(jac_norms)),
		g.declared_sup_radial_jacobian if g.declared_sup_radial_jacobian is not None else float(np.max(radial)),
		True,
	)
	logger.debug("Sampled sup norms for %s: %s", g.name, est)
	return est


FIELD_NAMES = ("radial-bump", "constant", "zero", "radial-aligned", "arc", "tilted-saturation")


def _builtin(desc: Mapping[str, Any]) -> FieldG:
	name = desc.get("name")
	d_theta = int(desc.get("d_theta", 2))
	if name == "radial-bump":
		return RadialBumpField(d_theta, float(desc.get("amplitude", 1.0)), float(desc.get("offset", 0.5)))
	if name == "constant":
		return ConstantField(desc["value"], d_theta)
	if name == "zero":
		return ZeroField(int(desc.get("d_w", 1)), d_theta)
	if name == "radial-aligned":
		return RadialAlignedField(desc["v"], d_theta, float(desc.get("amplitude", 1.0)), float(desc.get("offset", 0.5)))
	if name == "arc":
		return ArcField(float(desc.get("tilt", 0.3)))
	if name == "tilted-saturation":
		return TiltedSaturationField(desc["u"], float(desc.get("offset", 0.5)), float(desc.get("slope", 0.5)))
	raise ConfigError(f"Unknown field {name!r} (expected one of: {', '.join(FIELD_NAMES)}, ensemble)")


def field_from_descriptor(desc: Mapping[str, Any]) -> FieldG:
	"""Built-in field for a ``{"name": ..., ...}`` descriptor; ``ensemble`` is resolved by the caller."""

	try:
		return _builtin(desc)
	except KeyError as exc:
		raise ConfigError(f"field descriptor for {desc.get('name')!r} is missing {exc.args[0]!r}") from None
