"""Wasserstein-2 distances between uniform ensembles of equal size."""

from __future__ import annotations

import itertools
import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from ..core import DimensionMismatch
from .ensemble import Ensemble

logger = logging.getLogger(__name__)

W2_EXACT_CAP = 512
BRUTEFORCE_CAP = 8


class ExactSizeExceeded(ValueError):
	"""The exact assignment solver is capped; use :func:`w2_sliced` above the cap."""

	def __init__(self, m: int) -> None:
		self.m = m
		super().__init__(f"m={m} exceeds the exact W2 cap of {W2_EXACT_CAP}; use w2_sliced")


def _check_pair(a: Ensemble, b: Ensemble) -> None:
	if a.m != b.m:
		raise DimensionMismatch("particle count", a.m, b.m)
	if a.d_w != b.d_w or a.d_theta != b.d_theta:
		raise DimensionMismatch("ensemble dimensions (d_w, d_theta)", (a.d_w, a.d_theta), (b.d_w, b.d_theta))


def _cost_matrix(a: Ensemble, b: Ensemble) -> np.ndarray:
	return cdist(a.stacked(), b.stacked(), metric="sqeuclidean")


def w2_exact(a: Ensemble, b: Ensemble) -> float:
	"""Exact W2: square root of the optimal mean matching cost (Hungarian-type solver)."""

	_check_pair(a, b)
	if a.m > W2_EXACT_CAP:
		raise ExactSizeExceeded(a.m)
	cost = _cost_matrix(a, b)
	rows, cols = linear_sum_assignment(cost)
	return math.sqrt(max(float(cost[rows, cols].sum()) / a.m, 0.0))


def w2_bruteforce(a: Ensemble, b: Ensemble) -> float:
	"""Minimum over all m! matchings; an oracle for small m only."""

	_check_pair(a, b)
	if a.m > BRUTEFORCE_CAP:
		raise ValueError(f"brute force is limited to m <= {BRUTEFORCE_CAP}, got {a.m}")
	cost = _cost_matrix(a, b)
	idx = np.arange(a.m)
	best = math.inf
	for perm in itertools.permutations(range(a.m)):
		best = min(best, float(cost[idx, list(perm)].sum()))
	return math.sqrt(max(best / a.m, 0.0))


def random_directions(dim: int, count: int, seed: Optional[int]) -> np.ndarray:
	"""``count`` unit vectors, uniform on the sphere via normalized Gaussians."""

	rng = np.random.default_rng(seed)
	g = rng.standard_normal((count, dim))
	norms = np.linalg.norm(g, axis=1, keepdims=True)
	norms[norms == 0.0] = 1.0
	return g / norms


def w2_sliced(
	a: Ensemble,
	b: Ensemble,
	n_projections: int = 256,
	seed: Optional[int] = 0,
	*,
	directions: Optional[np.ndarray] = None,
) -> float:
	"""Average over unit directions of the exact 1-D W2 of the projections.

	Directions are random unless given explicitly (rows, normalized here). For
	ensembles supported on a line, the single direction of that line gives the
	exact W2.
	"""

	_check_pair(a, b)
	if directions is None:
		if n_projections < 1:
			raise ValueError("n_projections must be positive")
		dirs = random_directions(a.dim, n_projections, seed)
	else:
		dirs = np.atleast_2d(np.asarray(directions, dtype=np.float64))
		if dirs.shape[1] != a.dim:
			raise DimensionMismatch("projection direction length", a.dim, dirs.shape[1])
		dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
	pa = np.sort(a.stacked() @ dirs.T, axis=0)
	pb = np.sort(b.stacked() @ dirs.T, axis=0)
	per_direction = np.sqrt(np.mean((pa - pb) ** 2, axis=0))
	return float(np.mean(per_direction))


def w2(a: Ensemble, b: Ensemble, *, n_projections: int = 256, seed: Optional[int] = 0) -> Tuple[float, str]:
	"""Exact W2 when the size permits, sliced otherwise; returns ``(value, method)``."""

	if a.m <= W2_EXACT_CAP:
		return w2_exact(a, b), "exact"
	logger.debug("m=%s above exact cap, using sliced W2 with %s projections", a.m, n_projections)
	return w2_sliced(a, b, n_projections, seed), "sliced"
