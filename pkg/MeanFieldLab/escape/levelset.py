"""Locating level sets {h = 0} of scalar functions by bracketing and ``brentq``.

``h`` is always a batched callable mapping an ``(n, dim)`` array to ``n`` values,
negative inside the sublevel set of interest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

BatchFn = Callable[[np.ndarray], np.ndarray]


def _ray_grid(scale: float) -> np.ndarray:
	near = np.linspace(0.01, 2.0, 120)
	far = np.geomspace(2.0, 1e4, 80)[1:]
	return scale * np.concatenate([near, far])


@dataclass
class RaySearch:
	points: np.ndarray
	# Rays that never left the sublevel set before the far end of the grid.
	escaped: int


def ray_boundary_points(
	h: BatchFn,
	interior: np.ndarray,
	n: int,
	rng: np.random.Generator,
	*,
	scale: float = 1.0,
	max_radius: Optional[float] = None,
) -> RaySearch:
	"""First crossing of {h = 0} along ``n`` random rays cast from interior points."""

	interior = np.atleast_2d(interior)
	dim = interior.shape[1]
	grid = _ray_grid(scale)
	found = []
	escaped = 0
	for k in range(n):
		p = interior[k % interior.shape[0]]
		d = rng.standard_normal(dim)
		d /= np.linalg.norm(d)
		ts = grid
		if max_radius is not None:
			ts = ts[np.linalg.norm(p[None, :] + ts[:, None] * d[None, :], axis=1) <= max_radius]
			if ts.size == 0:
				continue
		vals = h(p[None, :] + ts[:, None] * d[None, :])
		out = np.flatnonzero(vals > 0.0)
		if out.size == 0:
			escaped += 1
			continue
		j = int(out[0])
		t_lo = 0.0 if j == 0 else float(ts[j - 1])
		t_hi = float(ts[j])

		def along(t: float) -> float:
			return float(h((p + t * d)[None, :])[0])

		if along(t_lo) > 0.0:
			continue
		t_star = brentq(along, t_lo, t_hi, xtol=1e-13, rtol=1e-12)
		found.append(p + t_star * d)
	pts = np.array(found) if found else np.empty((0, dim))
	return RaySearch(pts, escaped)


def sphere_level_points(
	h: BatchFn,
	dim: int,
	radius: float,
	n: int,
	rng: np.random.Generator,
	*,
	n_candidates: int = 4000,
) -> np.ndarray:
	"""Points of {h = 0} on the sphere of the given radius, found along chords between
	inside and outside samples, projected back to the sphere."""

	if dim == 1:
		cand = np.array([[radius], [-radius]])
		return cand[np.abs(h(cand)) < 1e-12]
	z = rng.standard_normal((n_candidates, dim))
	z /= np.linalg.norm(z, axis=1, keepdims=True)
	vals = h(radius * z)
	inside = z[vals < 0.0]
	outside = z[vals > 0.0]
	if inside.shape[0] == 0 or outside.shape[0] == 0:
		return np.empty((0, dim))
	found = []
	for k in range(n):
		a = inside[rng.integers(inside.shape[0])]
		b = outside[rng.integers(outside.shape[0])]
		if float(a @ b) < -0.999:
			continue

		def arc(t: float, a=a, b=b) -> float:
			x = (1.0 - t) * a + t * b
			return float(h((radius * x / np.linalg.norm(x))[None, :])[0])

		t_star = brentq(arc, 0.0, 1.0, xtol=1e-13, rtol=1e-12)
		x = (1.0 - t_star) * a + t_star * b
		found.append(radius * x / np.linalg.norm(x))
	return np.array(found) if found else np.empty((0, dim))


def probe_far_points(h: BatchFn, dim: int, radius: float, n: int, rng: np.random.Generator) -> int:
	"""How many of ``n`` random points on the sphere of the given radius lie in {h <= 0}."""

	z = rng.standard_normal((n, dim))
	z /= np.linalg.norm(z, axis=1, keepdims=True)
	return int(np.sum(h(radius * z) <= 0.0))
