"""Perturbation families g_t of a base field with sup_t ||g_t - g||_X <= epsilon.

The norm ||h||_X = ||h||_inf + sup_r ||r J_h(r .)||_inf is respected pointwise:
value offsets are bounded by their share of epsilon, and Jacobian offsets are
scaled by 1 / max(1, |theta|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

KINDS = ("none", "constant-offset", "time-oscillating", "adversarial-toward-boundary")


@dataclass(frozen=True)
class Perturbation:
	"""One member of a perturbation family.

	``direction`` is the unit offset direction for the constant and oscillating
	kinds; ``v`` is the direction whose pairing with g the adversary increases.
	"""

	kind: str = "none"
	epsilon: float = 0.0
	direction: Optional[Tuple[float, ...]] = None
	v: Optional[Tuple[float, ...]] = None
	omega: float = 1.0
	phase: float = 0.0
	extras: Dict[str, Any] = field(default_factory=dict)

	def __post_init__(self) -> None:
		if self.kind not in KINDS:
			raise ValueError(f"unknown perturbation kind {self.kind!r} (expected one of {', '.join(KINDS)})")
		if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
			raise ValueError(f"epsilon must be finite and >= 0, got {self.epsilon}")

	def _dir(self, d_w: int) -> np.ndarray:
		if self.direction is None:
			e = np.zeros(d_w)
			e[0] = 1.0
			return e
		d = np.asarray(self.direction, dtype=np.float64)
		return d / np.linalg.norm(d)

	def _v(self, d_w: int) -> np.ndarray:
		if self.v is None:
			e = np.zeros(d_w)
			e[0] = 1.0
			return e
		v = np.asarray(self.v, dtype=np.float64)
		return v / np.linalg.norm(v)

	def offsets(self, t: float, theta: np.ndarray, w: np.ndarray, J: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
		"""(value offset, Jacobian offset) at time t and state (w, theta) for base Jacobian J."""

		d_w, d_theta = J.shape
		zero_j = np.zeros((d_w, d_theta))
		if self.kind == "none" or self.epsilon == 0.0:
			return np.zeros(d_w), zero_j
		if self.kind == "constant-offset":
			return self.epsilon * self._dir(d_w), zero_j
		if self.kind == "time-oscillating":
			return self.epsilon * math.sin(self.omega * t + self.phase) * self._dir(d_w), zero_j
		# adversarial-toward-boundary: half the budget on the value, half on the Jacobian.
		v = self._v(d_w)
		value = 0.5 * self.epsilon * v
		jv = J.T @ v
		nw = float(np.linalg.norm(w))
		njv = float(np.linalg.norm(jv))
		if nw == 0.0 or njv == 0.0:
			return value, zero_j
		kappa = 0.5 * self.epsilon / max(1.0, float(np.linalg.norm(theta)))
		return value, -kappa * np.outer(w / nw, jv / njv)

	def describe(self) -> Dict[str, Any]:
		out: Dict[str, Any] = {"kind": self.kind, "epsilon": self.epsilon}
		if self.kind in ("constant-offset", "time-oscillating") and self.direction is not None:
			out["direction"] = list(self.direction)
		if self.kind == "time-oscillating":
			out["omega"] = self.omega
			out["phase"] = self.phase
		if self.kind == "adversarial-toward-boundary" and self.v is not None:
			out["v"] = list(self.v)
		return out


def make_perturbation(
	kind: str,
	epsilon: float,
	d_w: int,
	rng: np.random.Generator,
	*,
	v: Optional[np.ndarray] = None,
) -> Perturbation:
	"""Random member of a family: random unit direction, frequency and phase."""

	direction = rng.standard_normal(d_w)
	direction /= np.linalg.norm(direction)
	omega = float(rng.uniform(0.5, 5.0))
	phase = float(rng.uniform(0.0, 2.0 * math.pi))
	return Perturbation(
		kind=kind,
		epsilon=float(epsilon),
		direction=tuple(float(x) for x in direction),
		v=None if v is None else tuple(float(x) for x in np.asarray(v).reshape(-1)),
		omega=omega,
		phase=phase,
	)
