"""The reduced dynamics w' = -g_t(theta), theta' = -J_{g_t}(theta)^T w."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

from ..core import NumericalDivergence
from .fields import FieldG
from .perturbations import Perturbation

logger = logging.getLogger(__name__)


@dataclass
class EscapeTrajectory:
	times: np.ndarray
	w: np.ndarray
	theta: np.ndarray
	# 1/2 |w_t|^2 and its exact time derivative -<w_t, g_t(theta_t)>.
	half_sq: np.ndarray
	rate: np.ndarray
	# d/dt |w_t| = -<w_t/|w_t|, g_t(theta_t)>.
	speed: np.ndarray
	perturbation: Dict[str, Any] = field(default_factory=dict)

	@property
	def w_norm(self) -> np.ndarray:
		return np.linalg.norm(self.w, axis=1)

	def rows(self) -> List[List[float]]:
		return [
			[float(t), *map(float, w), *map(float, th), float(hs), float(r)]
			for t, w, th, hs, r in zip(self.times, self.w, self.theta, self.half_sq, self.rate)
		]

	def header(self) -> List[str]:
		return (
			["t"]
			+ [f"w_{i}" for i in range(self.w.shape[1])]
			+ [f"theta_{j}" for j in range(self.theta.shape[1])]
			+ ["half_sq_w", "d_half_sq_w"]
		)


def _rhs(g: FieldG, pert: Perturbation, t: float, w: np.ndarray, theta: np.ndarray):
	J = g.jacobian(theta)
	dv, dJ = pert.offsets(t, theta, w, J)
	gt = g.value(theta) + dv
	return -gt, -(J + dJ).T @ w, gt


def escape_ode_run(
	g: FieldG,
	pert: Perturbation,
	w0,
	theta0,
	*,
	t_end: float,
	step_size: float = 0.01,
	record_every: int = 1,
	integrator: str = "rk4",
) -> EscapeTrajectory:
	"""Integrate the reduced ODE on [0, t_end] and record the energy derivative at each record."""

	if integrator not in ("rk4", "euler"):
		raise ValueError(f"integrator must be 'rk4' or 'euler', got {integrator!r}")
	w = np.asarray(w0, dtype=np.float64).reshape(-1).copy()
	theta = np.asarray(theta0, dtype=np.float64).reshape(-1).copy()
	if w.shape[0] != g.d_w or theta.shape[0] != g.d_theta:
		raise ValueError(f"initial condition shapes {w.shape}, {theta.shape} do not match field ({g.d_w}, {g.d_theta})")
	n_steps = max(1, math.ceil(t_end / step_size - 1e-9))
	h = t_end / n_steps
	times, ws, thetas, rates, speeds = [], [], [], [], []

	def record(t: float, w: np.ndarray, theta: np.ndarray) -> None:
		_, _, gt = _rhs(g, pert, t, w, theta)
		nw = float(np.linalg.norm(w))
		times.append(t)
		ws.append(w.copy())
		thetas.append(theta.copy())
		rates.append(-float(w @ gt))
		speeds.append(-float(w @ gt) / nw if nw > 0 else -float(np.linalg.norm(gt)))

	record(0.0, w, theta)
	for step in range(1, n_steps + 1):
		t = (step - 1) * h
		if integrator == "euler":
			dw, dth, _ = _rhs(g, pert, t, w, theta)
			w, theta = w + h * dw, theta + h * dth
		else:
			k1w, k1t, _ = _rhs(g, pert, t, w, theta)
			k2w, k2t, _ = _rhs(g, pert, t + 0.5 * h, w + 0.5 * h * k1w, theta + 0.5 * h * k1t)
			k3w, k3t, _ = _rhs(g, pert, t + 0.5 * h, w + 0.5 * h * k2w, theta + 0.5 * h * k2t)
			k4w, k4t, _ = _rhs(g, pert, t + h, w + h * k3w, theta + h * k3t)
			w = w + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
			theta = theta + (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
		if not (np.all(np.isfinite(w)) and np.all(np.isfinite(theta))):
			raise NumericalDivergence(step=step, time=step * h, reason="non-finite escape state", last_finite=(ws[-1], thetas[-1]))
		if step % record_every == 0 or step == n_steps:
			record(step * h, w, theta)
	W = np.array(ws)
	return EscapeTrajectory(
		times=np.array(times),
		w=W,
		theta=np.array(thetas),
		half_sq=0.5 * np.sum(W * W, axis=1),
		rate=np.array(rates),
		speed=np.array(speeds),
		perturbation=pert.describe(),
	)
