"""Central finite-difference oracles shared by the tests."""

from __future__ import annotations

from typing import Callable

import numpy as np


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
	x = np.asarray(x, dtype=np.float64)
	grad = np.zeros_like(x)
	for idx in np.ndindex(x.shape):
		e = np.zeros_like(x)
		e[idx] = h
		grad[idx] = (f(x + e) - f(x - e)) / (2.0 * h)
	return grad


def fd_directional(f: Callable[[float], np.ndarray], h: float = 1e-6) -> np.ndarray:
	"""d/dt f(t) at t = 0."""
	return (np.asarray(f(h)) - np.asarray(f(-h))) / (2.0 * h)


def fd_second_directional(f: Callable[[float], np.ndarray], h: float = 1e-4) -> np.ndarray:
	"""d^2/dt^2 f(t) at t = 0."""
	return (np.asarray(f(h)) - 2.0 * np.asarray(f(0.0)) + np.asarray(f(-h))) / (h * h)


def fd_jacobian(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
	x = np.asarray(x, dtype=np.float64).reshape(-1)
	cols = []
	for j in range(x.shape[0]):
		e = np.zeros_like(x)
		e[j] = h
		cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
	return np.stack(cols, axis=-1)


def rel_err(a, b) -> float:
	a = np.asarray(a, dtype=np.float64)
	b = np.asarray(b, dtype=np.float64)
	return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))
