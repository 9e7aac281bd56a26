"""First variation and velocity field of the empirical risk functional.

For an ensemble mu, the residual R'(int Phi dmu) is computed once and shared:
g_mu(theta) = phi(theta)^* R', and the particle velocity is
(-g_mu(theta), -J_{g_mu}(theta)^T w).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from ..losses import LossSpec, Truncation, risk, risk_residual, xi, xi_prime
from ..measure import Ensemble, Particle
from ..models import Dataset, ModelSpec, predictor_mean

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FieldState:
	"""Energy and residual of one ensemble; ``raw_risk`` is the untruncated risk."""

	energy: float
	raw_risk: float
	residual: np.ndarray


def residual_arrays(
	W: np.ndarray,
	Theta: np.ndarray,
	model: ModelSpec,
	data: Dataset,
	loss: LossSpec,
	truncation: Optional[Truncation] = None,
) -> FieldState:
	preds = model.mean_prediction(W, Theta, data.inputs)
	raw = risk(loss, preds, data.labels)
	R = risk_residual(loss, preds, data.labels)
	if truncation is None:
		return FieldState(raw, raw, R)
	return FieldState(float(xi(truncation, raw)), raw, R * float(xi_prime(truncation, raw)))


def velocity_arrays(
	W: np.ndarray,
	Theta: np.ndarray,
	model: ModelSpec,
	data: Dataset,
	loss: LossSpec,
	truncation: Optional[Truncation] = None,
) -> Tuple[FieldState, np.ndarray, np.ndarray]:
	"""Field state plus the (w, theta) velocity blocks for every particle."""

	state = residual_arrays(W, Theta, model, data, loss, truncation)
	vw = -model.adjoint(Theta, data.inputs, state.residual)
	vt = -model.theta_pullback(W, Theta, data.inputs, state.residual)
	return state, vw, vt


def energy(ens: Ensemble, model: ModelSpec, data: Dataset, loss: LossSpec, truncation: Optional[Truncation] = None) -> float:
	"""F_m at the ensemble: risk of the mean predictor, optionally truncated."""

	raw = risk(loss, predictor_mean(ens, model, data), data.labels)
	return raw if truncation is None else float(xi(truncation, raw))


def g_mu(
	ens: Ensemble,
	model: ModelSpec,
	data: Dataset,
	loss: LossSpec,
	theta: np.ndarray,
	*,
	truncation: Optional[Truncation] = None,
) -> np.ndarray:
	state = residual_arrays(ens.w, ens.theta, model, data, loss, truncation)
	return model.phi_adjoint(np.asarray(theta, dtype=np.float64), data.inputs, state.residual)


def first_variation(
	ens: Ensemble,
	model: ModelSpec,
	data: Dataset,
	loss: LossSpec,
	w: np.ndarray,
	theta: np.ndarray,
	*,
	truncation: Optional[Truncation] = None,
) -> float:
	return float(np.dot(g_mu(ens, model, data, loss, theta, truncation=truncation), np.asarray(w, dtype=np.float64)))


def velocity(
	ens: Ensemble,
	model: ModelSpec,
	data: Dataset,
	loss: LossSpec,
	particle: Union[Particle, int],
	*,
	truncation: Optional[Truncation] = None,
) -> np.ndarray:
	"""Stacked (w, theta) velocity at a particle (given directly or by index)."""

	p = ens.particle(particle) if isinstance(particle, (int, np.integer)) else particle
	state = residual_arrays(ens.w, ens.theta, model, data, loss, truncation)
	vw = -model.adjoint(p.theta[None, :], data.inputs, state.residual)[0]
	vt = -model.theta_pullback(p.w[None, :], p.theta[None, :], data.inputs, state.residual)[0]
	return np.concatenate([vw, vt])


def global_minimizer_probe(
	ens: Ensemble,
	model: ModelSpec,
	data: Dataset,
	loss: LossSpec,
	thetas: np.ndarray,
) -> float:
	"""sup over the sampled thetas of |g_mu(theta)|; zero iff the first variation vanishes there."""

	state = residual_arrays(ens.w, ens.theta, model, data, loss)
	G = model.adjoint(np.atleast_2d(thetas), data.inputs, state.residual)
	return float(np.max(np.linalg.norm(G, axis=1)))
