"""Softmax, its first two differentials, and the hardmax (argmax-set) limit.

All functions act on the last axis, so a batch of score vectors can be passed
as an ``(..., n)`` array.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy.special import softmax as _scipy_softmax

DEFAULT_TIE_TOL = 1e-9


def softmax(z: np.ndarray) -> np.ndarray:
	"""Max-shifted softmax along the last axis."""

	return _scipy_softmax(np.asarray(z, dtype=np.float64), axis=-1)


def dsoftmax(z: np.ndarray, h: np.ndarray) -> np.ndarray:
	"""d softmax(z) . h = s * h - <s, h> s."""

	s = softmax(z)
	h = np.asarray(h, dtype=np.float64)
	return s * (h - np.sum(s * h, axis=-1, keepdims=True))


def d2softmax(z: np.ndarray, h: np.ndarray) -> np.ndarray:
	"""d^2 softmax(z) . (h, h) = s_i [(h_i - <h,s>)^2 - <s, h*h> + <s,h>^2]."""

	s = softmax(z)
	h = np.asarray(h, dtype=np.float64)
	mean = np.sum(s * h, axis=-1, keepdims=True)
	second = np.sum(s * h * h, axis=-1, keepdims=True)
	return s * ((h - mean) ** 2 - second + mean * mean)


def argmax_set(z: np.ndarray, tie_tol: float = DEFAULT_TIE_TOL) -> Tuple[int, ...]:
	"""0-based indices i with z_i >= max(z) - tie_tol."""

	z = np.asarray(z, dtype=np.float64)
	if z.ndim != 1 or z.size == 0:
		raise ValueError("argmax_set expects a non-empty vector")
	if tie_tol < 0:
		raise ValueError("tie_tol must be nonnegative")
	return tuple(int(i) for i in np.flatnonzero(z >= z.max() - tie_tol))


def hardmax(z: np.ndarray, tie_tol: float = DEFAULT_TIE_TOL) -> np.ndarray:
	"""Uniform weights on the argmax set along the last axis."""

	z = np.asarray(z, dtype=np.float64)
	mask = z >= np.max(z, axis=-1, keepdims=True) - tie_tol
	return mask / np.sum(mask, axis=-1, keepdims=True)
