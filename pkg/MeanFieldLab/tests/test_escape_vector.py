"""Tests for the refined alignment condition, stable sets and the local constants."""

from __future__ import annotations

import math
import unittest

import numpy as np

from MeanFieldLab.escape import (
	ArcField,
	EnsembleField,
	Perturbation,
	PreconditionError,
	RadialAlignedField,
	StableSetVector,
	cond_refined_check,
	local_constants,
	local_maximizer,
	make_perturbation,
	naive_construction_demo,
	sample_stable_set,
	stable_set_from_check,
	stable_set_from_maximizer,
	verify_stable_set_vector,
)
from MeanFieldLab.escape.vector import StableTrial
from MeanFieldLab.losses import LossSpec
from MeanFieldLab.measure import InitSpec, sample_ensemble
from MeanFieldLab.models import SigmoidNet
from MeanFieldLab.models.dataset import teacher_network

V = np.array([1.0, 1.0]) / math.sqrt(2.0)


class TestRefinedCondition(unittest.TestCase):
	def setUp(self) -> None:
		self.g = RadialAlignedField(V, d_theta=2)
		self.check = cond_refined_check(self.g, V, 0.9, n_samples=200, seed=1)

	def test_aligned_field_passes(self) -> None:
		self.assertEqual(self.check.verdict, "PASS")
		self.assertAlmostEqual(self.check.lhs, 0.0, places=12)
		self.assertAlmostEqual(self.check.rhs, 1.0, places=12)
		# |grad h| on the level h = 0.9, i.e. |theta|^2 = 1.5.
		self.assertAlmostEqual(self.check.beta, 2.0 * math.sqrt(1.5) / 2.5**2, places=6)

	def test_certificate_constants(self) -> None:
		cert = stable_set_from_check(self.check, V, 0.9)
		self.assertAlmostEqual(cert.delta, math.sqrt(0.5), places=6)
		self.assertAlmostEqual(cert.epsilon, self.check.beta * math.sqrt(0.5), places=6)
		self.assertAlmostEqual(cert.speed_floor(0.0), 0.9 * cert.delta, places=6)

	def test_trials_stay_in_the_cone(self) -> None:
		cert = stable_set_from_check(self.check, V, 0.9)
		rng = np.random.default_rng(2)
		starts = sample_stable_set(cert, self.check.K_points, 4, rng)
		perts = [
			Perturbation(),
			make_perturbation("constant-offset", cert.epsilon, 2, rng),
			Perturbation(),
			make_perturbation("constant-offset", cert.epsilon, 2, rng),
		]
		report = verify_stable_set_vector(self.g, cert, starts, perts, t_end=1.0, step_size=0.01, threads=1)
		self.assertEqual(report.verdict, "PASS")
		self.assertEqual(len(report.valid), 4)
		self.assertEqual(report.to_dict()["n_outside_A"], 0)

	def test_perturbed_trials_are_held_to_eta_delta_minus_epsilon(self) -> None:
		cert = stable_set_from_check(self.check, V, 0.9)
		self.assertTrue(cert.aligned)
		rng = np.random.default_rng(3)
		starts = sample_stable_set(cert, self.check.K_points, 2, rng)
		perts = [Perturbation(), make_perturbation("constant-offset", cert.epsilon, 2, rng)]
		report = verify_stable_set_vector(self.g, cert, starts, perts, t_end=0.5, step_size=0.01, threads=1)
		eta_delta = 0.9 * cert.delta
		self.assertAlmostEqual(report.trials[0].speed_floor, eta_delta, places=9)
		self.assertAlmostEqual(report.trials[1].speed_floor, eta_delta - cert.epsilon, places=9)
		self.assertTrue(report.speed_floor_met)
		self.assertGreaterEqual(report.min_speed_margin, -report.tolerance)
		self.assertGreaterEqual(report.trials[0].min_speed, eta_delta - 1e-6)
		out = report.to_dict()
		self.assertTrue(out["speed_floor_met"])
		self.assertTrue(out["certificate"]["aligned"])
		self.assertAlmostEqual(out["certificate"]["eta_delta"], eta_delta)

	def test_trial_below_its_floor_fails(self) -> None:
		trial = StableTrial(0, {}, False, False, min_alignment=0.9, min_speed=0.5, speed_floor=0.6, trajectory=None)
		self.assertFalse(trial.ok(0.8, 1e-6))
		trial.min_speed = 0.6
		self.assertTrue(trial.ok(0.8, 1e-6))
		trial.left_K = True
		self.assertFalse(trial.ok(0.8, 1e-6))

	def test_inconclusive_and_invalid_inputs(self) -> None:
		empty = cond_refined_check(self.g, V, 5.0, n_samples=50)
		self.assertEqual(empty.verdict, "INCONCLUSIVE")
		with self.assertRaises(PreconditionError):
			stable_set_from_check(empty, V, 5.0)
		with self.assertRaises(ValueError):
			cond_refined_check(self.g, [1.0, 0.0, 0.0], 0.9)
		with self.assertRaises(ValueError):
			cond_refined_check(self.g, [0.0, 0.0], 0.9)


class TestLocalConstants(unittest.TestCase):
	def test_scalar_case(self) -> None:
		lc = local_constants([[0.5]], [[1.0]])
		self.assertAlmostEqual(lc.c1, 0.5)
		self.assertAlmostEqual(lc.c2, 2.0, places=6)
		self.assertTrue(lc.passed)

	def test_identity_hessian_half_jacobian(self) -> None:
		lc = local_constants(0.5 * np.eye(2), np.eye(2))
		self.assertAlmostEqual(lc.c1, 0.5, places=9)
		self.assertAlmostEqual(lc.c2, 2.0, places=6)
		self.assertAlmostEqual(lc.c2_mesh, 2.0, places=6)
		self.assertTrue(lc.passed)

	def test_invariant_under_orthogonal_changes_of_coordinates(self) -> None:
		rng = np.random.default_rng(11)
		L = rng.standard_normal((3, 3))
		H = L @ L.T + 3.0 * np.eye(3)
		J = 0.3 * rng.standard_normal((2, 3))
		Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
		R, _ = np.linalg.qr(rng.standard_normal((2, 2)))
		base = local_constants(J, H)
		turned = local_constants(R @ J @ Q, Q.T @ H @ Q)
		self.assertAlmostEqual(turned.c1, base.c1, places=8)
		self.assertAlmostEqual(turned.c2, base.c2, delta=1e-4 * base.c2)
		self.assertEqual(turned.passed, base.passed)

	def test_preconditions(self) -> None:
		with self.assertRaises(PreconditionError):
			local_constants([[0.1, 0.0]], [[1.0, 0.5], [0.0, 1.0]])
		with self.assertRaises(PreconditionError):
			local_constants([[0.1, 0.0]], [[1.0, 0.0], [0.0, -1.0]])
		with self.assertRaises(PreconditionError):
			local_constants([[2.0]], [[1.0]])
		with self.assertRaises(ValueError):
			local_constants([[1.0, 0.0]], [[1.0]])

	def test_arc_field_maximizer(self) -> None:
		g = ArcField(0.3)
		mx = local_maximizer(g, [0.2])
		self.assertAlmostEqual(float(mx.theta[0]), 0.0, places=6)
		np.testing.assert_allclose(mx.v, [1.0, 0.0], atol=1e-9)
		self.assertAlmostEqual(float(mx.H[0, 0]), 2.0, places=4)
		lc = local_constants(mx.J, mx.H)
		self.assertAlmostEqual(lc.c1, 0.3 / math.sqrt(2.0), places=4)
		self.assertAlmostEqual(lc.c2, 2.0 / (0.3 * math.sqrt(2.0)), places=3)
		self.assertTrue(lc.passed)

	def test_tilted_field_floor_sits_below_eta_delta(self) -> None:
		# On the edge of K for the arc field, a start at cos(w, v) = delta tilted
		# against g moves slower than eta * delta but not slower than the floor.
		g = ArcField(0.3)
		v = np.array([1.0, 0.0])
		theta = np.array([1.0 / 3.0])
		gv = g.value(theta)
		eta = -float(gv @ v)
		self.assertAlmostEqual(eta, 0.9, places=12)
		gamma = eta / float(np.linalg.norm(gv))
		delta = 0.8
		cert = StableSetVector(v, eta, delta, 0.0, 1.0, 0.3, gamma)
		self.assertFalse(cert.aligned)
		w = np.array([delta, -math.sqrt(1.0 - delta**2)])
		speed = -float(w @ gv)
		self.assertLess(speed, eta * delta - 1e-3)
		self.assertGreaterEqual(speed, cert.speed_floor(0.0) - 1e-12)

	def test_maximizer_construction(self) -> None:
		out = stable_set_from_maximizer(ArcField(0.3), [0.2], eta_fraction=0.9, n_samples=200)
		self.assertAlmostEqual(out.eta, 0.9, places=6)
		self.assertIn("local_constants", out.to_dict())
		with self.assertRaises(ValueError):
			stable_set_from_maximizer(ArcField(0.3), [0.2], eta_fraction=1.0)


class TestNaiveDemo(unittest.TestCase):
	def test_fractions(self) -> None:
		g = RadialAlignedField(V, d_theta=2)
		demo = naive_construction_demo(g, 0.6, 0.05, [0.1, 1.0, 10.0], n_directions=32, n_per_direction=8)
		self.assertEqual(len(demo.fractions), 3)
		self.assertGreater(demo.n_pairs, 0)
		self.assertTrue(all(0.0 <= f <= 1.0 for f in demo.fractions))


class TestEnsembleField(unittest.TestCase):
	def test_matches_model_adjoint(self) -> None:
		data = teacher_network(15, 2, 2, seed=4)
		model = SigmoidNet(2, 2)
		ens = sample_ensemble(InitSpec("gaussian", 2, 2, seed=5), 6)
		g = EnsembleField(ens, model, data, LossSpec("square", 2))
		theta = np.array([0.2, -0.3])
		fd = super(EnsembleField, g).jacobian(theta)
		np.testing.assert_allclose(g.jacobian(theta), fd, atol=1e-6)
		np.testing.assert_allclose(g.value_batch(theta[None, :])[0], g.value(theta))


if __name__ == "__main__":
	unittest.main()
