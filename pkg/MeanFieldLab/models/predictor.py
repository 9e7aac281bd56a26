"""The measure-to-predictor map and its continuity constant."""

from __future__ import annotations

import logging
from typing import Iterable, Tuple

import numpy as np

from ..core import DimensionMismatch
from ..measure import Ensemble, second_moment, w2_exact
from .base import ModelSpec
from .dataset import Dataset

logger = logging.getLogger(__name__)


def predictor_mean(ens: Ensemble, model: ModelSpec, data: Dataset) -> np.ndarray:
	"""Row s is (1/m) sum_i Phi(w_i, theta_i)(x_s)."""

	if ens.d_w != model.d_w or ens.d_theta != model.d_theta:
		raise DimensionMismatch("ensemble vs model (d_w, d_theta)", (model.d_w, model.d_theta), (ens.d_w, ens.d_theta))
	return model.mean_prediction(ens.w, ens.theta, data.inputs)


def l2_distance(f: np.ndarray, g: np.ndarray) -> float:
	"""Norm of f - g in L2 of the empirical input measure."""

	diff = np.atleast_2d(f) - np.atleast_2d(g)
	return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


def predictor_bound_ratio(a: Ensemble, b: Ensemble, model: ModelSpec, data: Dataset) -> float:
	"""||mean(a) - mean(b)|| / ((1 + m2(a) + m2(b)) W2(a, b)); 0 when a and b coincide."""

	dist = w2_exact(a, b)
	lhs = l2_distance(predictor_mean(a, model, data), predictor_mean(b, model, data))
	if dist == 0.0:
		return 0.0
	return lhs / ((1.0 + second_moment(a) + second_moment(b)) * dist)


def fit_predictor_constant(pairs: Iterable[Tuple[Ensemble, Ensemble]], model: ModelSpec, data: Dataset) -> float:
	"""Smallest constant making the continuity bound hold on the calibration pairs."""

	ratios = [predictor_bound_ratio(a, b, model, data) for a, b in pairs]
	if not ratios:
		raise ValueError("fit_predictor_constant needs at least one calibration pair")
	c = max(ratios)
	logger.debug("Fitted predictor constant %.6g over %s pairs", c, len(ratios))
	return c
