"""Tests for the losses, the empirical risk and the truncation xi."""

from __future__ import annotations

import math
import unittest

import numpy as np

from MeanFieldLab.core import DimensionMismatch
from MeanFieldLab.losses import (
	LIPSCHITZ,
	LabelError,
	LossSpec,
	Truncation,
	loss_grad,
	loss_grads,
	loss_value,
	loss_values,
	residual_sq_norm,
	risk,
	risk_residual,
	xi,
	xi_double_prime,
	xi_prime,
)
from MeanFieldLab.tests._fd import fd_gradient, rel_err


class TestSquareLoss(unittest.TestCase):
	def test_value_and_gradient(self) -> None:
		spec = LossSpec("square", 2)
		z = np.array([1.0, -2.0])
		y = np.array([0.5, 1.0])
		self.assertAlmostEqual(loss_value(spec, z, y), 0.5 * (0.25 + 9.0))
		np.testing.assert_allclose(loss_grad(spec, z, y), z - y)

	def test_risk_and_residual(self) -> None:
		spec = LossSpec("square", 1)
		z = np.array([[1.0], [2.0], [3.0]])
		y = np.zeros((3, 1))
		self.assertAlmostEqual(risk(spec, z, y), (0.5 + 2.0 + 4.5) / 3.0)
		r = risk_residual(spec, z, y)
		self.assertAlmostEqual(residual_sq_norm(r), 14.0 / 3.0)
		self.assertAlmostEqual(residual_sq_norm(r), 2.0 * risk(spec, z, y))

	def test_shapes(self) -> None:
		spec = LossSpec("square", 2)
		with self.assertRaises(DimensionMismatch):
			loss_values(spec, np.zeros((3, 2)), np.zeros((3, 1)))
		with self.assertRaises(DimensionMismatch):
			loss_values(LossSpec("square", 3), np.zeros((3, 2)), np.zeros((3, 2)))
		with self.assertRaises(ValueError):
			LossSpec("hinge", 1)


class TestCrossEntropy(unittest.TestCase):
	def test_gradient_matches_finite_differences(self) -> None:
		spec = LossSpec("cross-entropy", 4)
		rng = np.random.default_rng(61)
		y = np.eye(4)[2]
		for _ in range(10):
			z = 2.0 * rng.standard_normal(4)
			fd = fd_gradient(lambda v: loss_value(spec, v, y), z)
			self.assertLess(rel_err(loss_grad(spec, z, y), fd), 1e-6)

	def test_large_logits_are_stable(self) -> None:
		spec = LossSpec("cross-entropy", 2)
		val = loss_value(spec, np.array([1000.0, 0.0]), np.array([0.0, 1.0]))
		self.assertAlmostEqual(val, 1000.0)
		self.assertEqual(loss_value(spec, np.array([1000.0, 0.0]), np.array([1.0, 0.0])), 0.0)

	def test_labels_must_be_one_hot(self) -> None:
		spec = LossSpec("cross-entropy", 3)
		with self.assertRaises(LabelError):
			loss_values(spec, np.zeros((1, 3)), np.array([[0.5, 0.5, 0.0]]))
		with self.assertRaises(LabelError):
			loss_values(spec, np.zeros((1, 3)), np.array([[1.0, 1.0, 0.0]]))

	def test_gradient_bound_and_lipschitz(self) -> None:
		rng = np.random.default_rng(62)
		for kind in ("square", "cross-entropy"):
			spec = LossSpec(kind, 3)
			z = 3.0 * rng.standard_normal((500, 3))
			y = np.eye(3)[rng.integers(3, size=500)]
			g = loss_grads(spec, z, y)
			self.assertTrue(np.all(np.sum(g * g, axis=1) <= 2.0 * loss_values(spec, z, y) + 1e-12), kind)
			z2 = z + 0.1 * rng.standard_normal(z.shape)
			ratio = np.linalg.norm(loss_grads(spec, z2, y) - g, axis=1) / np.linalg.norm(z2 - z, axis=1)
			self.assertLessEqual(float(np.max(ratio)), LIPSCHITZ[kind] + 1e-12, kind)


class TestTruncation(unittest.TestCase):
	def test_branches(self) -> None:
		t = Truncation(2.0)
		self.assertEqual(xi(t, 1.3), 1.3)
		self.assertEqual(xi(t, 9.0), 4.0)
		self.assertAlmostEqual(xi(t, 3.0), 13.0 * 2.0 / 8.0, places=12)
		self.assertEqual(xi_prime(t, 0.5), 1.0)
		self.assertEqual(xi_prime(t, 5.0), 0.0)
		with self.assertRaises(ValueError):
			Truncation(0.0)
		with self.assertRaises(ValueError):
			Truncation(math.inf)

	def test_derivatives_inside_middle_branch(self) -> None:
		t = Truncation(1.0)
		for x0 in np.linspace(1.05, 1.95, 10):
			d1 = (xi(t, x0 + 1e-6) - xi(t, x0 - 1e-6)) / 2e-6
			d2 = (xi_prime(t, x0 + 1e-6) - xi_prime(t, x0 - 1e-6)) / 2e-6
			self.assertAlmostEqual(xi_prime(t, x0), d1, places=6)
			self.assertAlmostEqual(xi_double_prime(t, x0), d2, places=5)

	def test_knots(self) -> None:
		t = Truncation(1.0)
		h = 1e-9
		for knot in (1.0, 2.0):
			self.assertAlmostEqual(xi(t, knot + h), xi(t, knot - h), places=7)
			self.assertAlmostEqual(xi_prime(t, knot + h), xi_prime(t, knot - h), places=6)
		self.assertAlmostEqual(xi_double_prime(t, 1.0 + h), 0.0, places=6)
		self.assertAlmostEqual(xi_double_prime(t, 2.0 - 1e-12), -2.0, places=6)

	def test_monotone_and_capped(self) -> None:
		t = Truncation(0.7)
		x = np.linspace(0.0, 3.0, 2001)
		v = xi(t, x)
		self.assertTrue(np.all(np.diff(v) >= -1e-15))
		self.assertTrue(np.all(v <= 1.4 + 1e-12))
		self.assertTrue(np.all(v <= np.maximum(x, 0.0) * 1.5 + 1e-12))


if __name__ == "__main__":
	unittest.main()
