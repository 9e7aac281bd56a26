"""Fixed-step Euler / RK4 integration of the particle gradient flow with step halving."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional

import numpy as np

from ..core import DIVERGENCE_ENERGY, DIVERGENCE_NORM, ConfigError, NumericalDivergence
from ..losses import LossSpec, Truncation
from ..measure import Ensemble, psi2_norm, second_moment
from ..models import Dataset, ModelSpec
from .field import velocity_arrays

logger = logging.getLogger(__name__)

INTEGRATORS = ("euler", "rk4")

# Relative slack before an energy increase triggers a halving.
ENERGY_SLACK = 1e-12

STATUS_COMPLETED = "completed"
STATUS_DIVERGED = "diverged"


@dataclass(frozen=True)
class FlowConfig:
	integrator: str = "rk4"
	step_size: float = 0.05
	t_end: float = 5.0
	record_every: int = 10
	truncation: Optional[Truncation] = None
	max_halvings: int = 20

	def __post_init__(self) -> None:
		if self.integrator not in INTEGRATORS:
			raise ConfigError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
		if not (self.step_size > 0 and math.isfinite(self.step_size)):
			raise ConfigError(f"step_size must be positive, got {self.step_size!r}")
		if not (self.t_end > 0 and math.isfinite(self.t_end)):
			raise ConfigError(f"t_end must be positive, got {self.t_end!r}")
		if self.record_every < 1:
			raise ConfigError(f"record_every must be >= 1, got {self.record_every!r}")
		if self.max_halvings < 0:
			raise ConfigError("max_halvings must be >= 0")

	@property
	def n_steps(self) -> int:
		return max(1, math.ceil(self.t_end / self.step_size - 1e-9))

	@classmethod
	def from_dict(cls, data: Mapping[str, Any]) -> "FlowConfig":
		trunc = data.get("truncation")
		if isinstance(trunc, Mapping):
			trunc = Truncation(float(trunc["alpha"]))
		elif trunc is not None:
			trunc = Truncation(float(trunc))
		return cls(
			integrator=str(data.get("integrator", "rk4")),
			step_size=float(data.get("step_size", 0.05)),
			t_end=float(data.get("t_end", 5.0)),
			record_every=int(data.get("record_every", 10)),
			truncation=trunc,
			max_halvings=int(data.get("max_halvings", 20)),
		)

	def to_dict(self) -> Dict[str, Any]:
		return {
			"integrator": self.integrator,
			"step_size": self.step_size,
			"t_end": self.t_end,
			"record_every": self.record_every,
			"truncation": None if self.truncation is None else self.truncation.descriptor(),
			"max_halvings": self.max_halvings,
		}


@dataclass
class Trajectory:
	"""Recorded states of a flow. ``grad_norms`` are root-mean-square particle speeds,
	so that dE/dt = -grad_norm^2 along the exact flow. ``dissipation`` holds the
	running integral of grad_norm^2, accumulated over every integration step."""

	times: List[float] = field(default_factory=list)
	states: List[Ensemble] = field(default_factory=list)
	energies: List[float] = field(default_factory=list)
	grad_norms: List[float] = field(default_factory=list)
	psi2: List[float] = field(default_factory=list)
	second_moments: List[float] = field(default_factory=list)
	dissipation: List[float] = field(default_factory=list)
	halvings: int = 0
	status: str = STATUS_COMPLETED

	def __len__(self) -> int:
		return len(self.times)

	def append(self, t: float, ens: Ensemble, energy: float, grad_norm: float, dissipation: float = 0.0) -> None:
		self.times.append(float(t))
		self.states.append(ens)
		self.energies.append(float(energy))
		self.grad_norms.append(float(grad_norm))
		self.psi2.append(psi2_norm(ens))
		self.second_moments.append(second_moment(ens))
		self.dissipation.append(float(dissipation))

	@property
	def final(self) -> Ensemble:
		return self.states[-1]

	def energy_drop(self) -> float:
		return self.energies[0] - self.energies[-1]

	def dissipation_integral(self) -> float:
		"""Integral of grad_norm^2 over [t_0, t_end]; per-step values when present,
		otherwise a trapezoid over the recorded times."""

		if len(self.dissipation) == len(self.times) and len(self.times) > 0 and all(map(math.isfinite, self.dissipation)):
			return float(self.dissipation[-1] - self.dissipation[0])
		t = np.asarray(self.times)
		g2 = np.asarray(self.grad_norms) ** 2
		return float(np.sum(0.5 * (g2[1:] + g2[:-1]) * np.diff(t)))


VelocityFn = Callable[[np.ndarray], tuple]


def _step(kind: str, f: VelocityFn, u: np.ndarray, h: float) -> np.ndarray:
	k1 = f(u)
	if kind == "euler":
		return u + h * k1
	k2 = f(u + 0.5 * h * k1)
	k3 = f(u + 0.5 * h * k2)
	k4 = f(u + h * k3)
	return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class _FlowSystem:
	"""Stacked-coordinate view of the particle system for one model/dataset/loss."""

	def __init__(self, d_w: int, model: ModelSpec, data: Dataset, loss: LossSpec, truncation: Optional[Truncation]) -> None:
		self.d_w = d_w
		self.model = model
		self.data = data
		self.loss = loss
		self.truncation = truncation

	def evaluate(self, u: np.ndarray):
		state, vw, vt = velocity_arrays(u[:, : self.d_w], u[:, self.d_w :], self.model, self.data, self.loss, self.truncation)
		return state.energy, np.hstack([vw, vt])

	def velocity(self, u: np.ndarray) -> np.ndarray:
		if not np.all(np.isfinite(u)):
			return np.full_like(u, np.nan)
		return self.evaluate(u)[1]


def _divergence_reason(u: np.ndarray, energy: float) -> Optional[str]:
	if not np.all(np.isfinite(u)):
		return "non-finite particle state"
	if not math.isfinite(energy):
		return "non-finite energy"
	norm = float(np.max(np.linalg.norm(u, axis=1)))
	if norm > DIVERGENCE_NORM:
		return f"particle norm {norm:.3g} exceeds {DIVERGENCE_NORM:.0e}"
	if energy > DIVERGENCE_ENERGY:
		return f"energy {energy:.3g} exceeds {DIVERGENCE_ENERGY:.0e}"
	return None


def run_flow(
	ens0: Ensemble,
	model: ModelSpec,
	data: Dataset,
	loss: LossSpec,
	cfg: FlowConfig,
) -> Trajectory:
	"""Integrate all particles on [0, t_end]; raises NumericalDivergence carrying the partial trajectory."""

	system = _FlowSystem(ens0.d_w, model, data, loss, cfg.truncation)
	traj = Trajectory()
	u = ens0.stacked().copy()
	E, V = system.evaluate(u)
	g2 = _rms(V) ** 2
	dissipated = 0.0
	traj.append(0.0, ens0, E, math.sqrt(g2), dissipated)
	t = 0.0
	n_steps = cfg.n_steps
	exhausted_warned = False

	def advance(u0: np.ndarray, e0: float, g0: float, h: float, depth: int):
		"""One step of size h, halved while the energy rises; also returns the
		trapezoid integral of grad_norm^2 over the accepted substeps."""

		nonlocal exhausted_warned
		u1 = _step(cfg.integrator, system.velocity, u0, h)
		if not np.all(np.isfinite(u1)):
			return u1, math.nan, math.nan, 0.0, 0
		e1, V1 = system.evaluate(u1)
		g1 = _rms(V1) ** 2
		if e1 <= e0 + ENERGY_SLACK * max(1.0, abs(e0)):
			return u1, e1, g1, 0.5 * h * (g0 + g1), 0
		if depth >= cfg.max_halvings:
			if not exhausted_warned:
				logger.warning("Energy still increases after %s halvings (h=%.3g); accepting the step", depth, h)
				exhausted_warned = True
			return u1, e1, g1, 0.5 * h * (g0 + g1), 0
		ua, ea, ga, da, ka = advance(u0, e0, g0, 0.5 * h, depth + 1)
		if not math.isfinite(ea):
			return ua, ea, ga, da, ka + 1
		ub, eb, gb, db, kb = advance(ua, ea, ga, 0.5 * h, depth + 1)
		return ub, eb, gb, da + db, 1 + ka + kb

	for step in range(1, n_steps + 1):
		h = min(cfg.step_size, cfg.t_end - t) if step == n_steps else cfg.step_size
		u_new, E_new, g2_new, d_step, halvings = advance(u, E, g2, h, 0)
		if halvings:
			logger.info("Step %s: %s halving(s) to keep the energy non-increasing", step, halvings)
			traj.halvings += halvings
		t = cfg.t_end if step == n_steps else t + h
		reason = _divergence_reason(u_new, E_new)
		if reason is not None:
			traj.status = STATUS_DIVERGED
			logger.warning("Flow diverged at step %s: %s", step, reason)
			raise NumericalDivergence(step=step, time=t, reason=reason, last_finite=traj)
		u, E, g2 = u_new, E_new, g2_new
		dissipated += d_step
		if step % cfg.record_every == 0 or step == n_steps:
			ens = Ensemble.from_stacked(u, ens0.d_w)
			traj.append(t, ens, E, math.sqrt(g2), dissipated)
			logger.debug("t=%.4g energy=%.6g grad_norm=%.4g", t, E, traj.grad_norms[-1])
	return traj


def _rms(V: np.ndarray) -> float:
	return float(np.sqrt(np.mean(np.sum(V * V, axis=1))))
