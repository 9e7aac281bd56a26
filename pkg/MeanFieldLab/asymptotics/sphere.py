"""Direction samplers on the unit sphere of R^dim (matrices are sampled through their vectorization)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPHERE_KINDS = ("uniform", "stratified-plus-axes")


@dataclass(frozen=True)
class SphereSampler:
	dim: int
	count: int
	seed: int = 0
	kind: str = "stratified-plus-axes"

	def __post_init__(self) -> None:
		if self.kind not in SPHERE_KINDS:
			raise ValueError(f"unknown sphere kind {self.kind!r} (expected one of {', '.join(SPHERE_KINDS)})")
		if self.dim < 1 or self.count < 1:
			raise ValueError(f"SphereSampler needs dim >= 1 and count >= 1, got {self.dim}, {self.count}")

	def sample(self) -> np.ndarray:
		"""``(k, dim)`` unit vectors; the stratified kind appends the 2*dim signed axes."""

		rng = np.random.default_rng(self.seed)
		if self.dim == 1:
			return np.array([[1.0], [-1.0]])
		if self.kind == "uniform":
			z = rng.standard_normal((self.count, self.dim))
		elif self.dim == 2:
			t = (np.arange(self.count) + rng.uniform()) * (2.0 * math.pi / self.count)
			z = np.stack([np.cos(t), np.sin(t)], axis=1)
		else:
			half = rng.standard_normal(((self.count + 1) // 2, self.dim))
			z = np.vstack([half, -half])[: self.count]
		z = z / np.linalg.norm(z, axis=1, keepdims=True)
		if self.kind == "stratified-plus-axes":
			eye = np.eye(self.dim)
			z = np.vstack([z, eye, -eye])
		return z

	def matrices(self, d: int) -> np.ndarray:
		"""Samples reshaped to ``(k, d, d)``; Frobenius norm 1."""

		if self.dim != d * d:
			raise ValueError(f"sampler dimension {self.dim} is not {d}^2")
		return self.sample().reshape(-1, d, d)
