"""Tests for the velocity field, the particle flow and trajectory persistence."""

from __future__ import annotations

import tempfile
import unittest
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import expit

from MeanFieldLab.core import ConfigError, ManifestError, NumericalDivergence, write_json_atomic
from MeanFieldLab.escape import EnsembleField, Perturbation, escape_ode_run
from MeanFieldLab.losses import LossSpec, Truncation, risk
from MeanFieldLab.measure import Ensemble, InitSpec, sample_ensemble
from MeanFieldLab.flow import (
	FlowConfig,
	energy,
	first_variation,
	g_mu,
	global_minimizer_probe,
	load_trajectory,
	run_flow,
	save_trajectory,
	velocity,
)
from MeanFieldLab.flow.integrate import _divergence_reason
from MeanFieldLab.models import AttentionHead, Dataset, SigmoidNet, predictor_mean
from MeanFieldLab.models.dataset import attention_contexts, teacher_network
from MeanFieldLab.tests._fd import fd_gradient, rel_err


def _energy_of_stacked(model, data, loss, d_w, truncation=None):
	def f(u: np.ndarray) -> float:
		return energy(Ensemble.from_stacked(u, d_w), model, data, loss, truncation)

	return f


class TestVelocityField(unittest.TestCase):
	def setUp(self) -> None:
		self.data = teacher_network(25, 2, 1, seed=3)
		self.model = SigmoidNet(2, 1)
		self.loss = LossSpec("square", 1)
		self.ens = sample_ensemble(InitSpec("gaussian", 1, 2, seed=4), 5)

	def test_velocity_is_scaled_negative_gradient(self) -> None:
		grad = fd_gradient(_energy_of_stacked(self.model, self.data, self.loss, 1), self.ens.stacked())
		for i in range(self.ens.m):
			v = velocity(self.ens, self.model, self.data, self.loss, i)
			self.assertLess(rel_err(v, -self.ens.m * grad[i]), 1e-5)

	def test_truncated_velocity(self) -> None:
		raw = risk(self.loss, predictor_mean(self.ens, self.model, self.data), self.data.labels)
		trunc = Truncation(raw / 1.5)
		grad = fd_gradient(_energy_of_stacked(self.model, self.data, self.loss, 1, trunc), self.ens.stacked())
		v = velocity(self.ens, self.model, self.data, self.loss, self.ens.particle(2), truncation=trunc)
		self.assertLess(rel_err(v, -self.ens.m * grad[2]), 1e-5)

	def test_first_variation_and_probe(self) -> None:
		theta = np.array([0.3, -0.4])
		w = np.array([1.7])
		g = g_mu(self.ens, self.model, self.data, self.loss, theta)
		self.assertAlmostEqual(first_variation(self.ens, self.model, self.data, self.loss, w, theta), float(g @ w))
		thetas = np.array([theta, [1.0, 1.0]])
		probe = global_minimizer_probe(self.ens, self.model, self.data, self.loss, thetas)
		self.assertGreaterEqual(probe, float(np.linalg.norm(g)) - 1e-15)

	def test_cross_entropy_attention(self) -> None:
		data = attention_contexts(12, 2, 3, 2, seed=5)
		labels = np.eye(2)[np.argmax(data.labels, axis=1)]
		data = Dataset(data.inputs, labels, 3)
		model = AttentionHead(2, 3, 2)
		loss = LossSpec("cross-entropy", 2)
		ens = sample_ensemble(InitSpec("gaussian", model.d_w, model.d_theta, scale=0.5, seed=6), 3)
		grad = fd_gradient(_energy_of_stacked(model, data, loss, model.d_w), ens.stacked())
		v = velocity(ens, model, data, loss, 1)
		self.assertLess(rel_err(v, -ens.m * grad[1]), 1e-5)


class TestRunFlow(unittest.TestCase):
	def setUp(self) -> None:
		self.data = teacher_network(30, 2, 1, seed=7)
		self.model = SigmoidNet(2, 1)
		self.loss = LossSpec("square", 1)
		self.ens = sample_ensemble(InitSpec("gaussian", 1, 2, seed=8), 8)

	def test_energy_is_monotone(self) -> None:
		cfg = FlowConfig("euler", step_size=0.1, t_end=1.0, record_every=2)
		traj = run_flow(self.ens, self.model, self.data, self.loss, cfg)
		self.assertEqual(len(traj), 6)
		self.assertAlmostEqual(traj.times[-1], 1.0)
		self.assertTrue(all(b <= a + 1e-12 for a, b in zip(traj.energies, traj.energies[1:])))
		self.assertTrue(traj.states[0].same_as(self.ens))

	def test_energy_drop_matches_dissipation(self) -> None:
		cfg = FlowConfig("rk4", step_size=0.02, t_end=1.0, record_every=1)
		traj = run_flow(self.ens, self.model, self.data, self.loss, cfg)
		self.assertGreater(traj.energy_drop(), 0.0)
		self.assertAlmostEqual(traj.energy_drop() / traj.dissipation_integral(), 1.0, delta=1e-2)

	def test_dissipation_is_accumulated_between_records(self) -> None:
		dense = run_flow(self.ens, self.model, self.data, self.loss, FlowConfig("rk4", step_size=0.02, t_end=2.0, record_every=1))
		sparse = run_flow(self.ens, self.model, self.data, self.loss, FlowConfig("rk4", step_size=0.02, t_end=2.0, record_every=100))
		self.assertEqual(len(sparse), 2)
		self.assertAlmostEqual(sparse.dissipation_integral(), dense.dissipation_integral(), delta=1e-12)
		self.assertAlmostEqual(sparse.energy_drop() / sparse.dissipation_integral(), 1.0, delta=1e-3)
		with tempfile.TemporaryDirectory() as td:
			save_trajectory(td, sparse, {"kind": "simulate"})
			back, _ = load_trajectory(td)
		self.assertAlmostEqual(back.dissipation_integral(), sparse.dissipation_integral(), delta=1e-15)

	def test_permuting_particles_permutes_the_flow(self) -> None:
		perm = np.random.default_rng(12).permutation(self.ens.m)
		shuffled = Ensemble(self.ens.w[perm], self.ens.theta[perm])
		cfg = FlowConfig("rk4", step_size=0.05, t_end=1.0, record_every=5)
		a = run_flow(self.ens, self.model, self.data, self.loss, cfg)
		b = run_flow(shuffled, self.model, self.data, self.loss, cfg)
		np.testing.assert_allclose(b.final.w, a.final.w[perm], atol=1e-12)
		np.testing.assert_allclose(b.final.theta, a.final.theta[perm], atol=1e-12)
		np.testing.assert_allclose(b.energies, a.energies, rtol=1e-12)

	def test_single_particle_matches_direct_gradient_descent(self) -> None:
		X, y = self.data.inputs, self.data.labels[:, 0]
		w0, th0 = float(self.ens.w[0, 0]), self.ens.theta[0]

		def rhs(_t, u):
			s = expit(X @ u[1:])
			r = s * u[0] - y
			dw = -np.mean(r * s)
			dth = -(r * u[0] * s * (1.0 - s)) @ X / X.shape[0]
			return np.concatenate([[dw], dth])

		ref = solve_ivp(rhs, (0.0, 1.0), np.concatenate([[w0], th0]), method="DOP853", rtol=1e-11, atol=1e-12)
		single = Ensemble(self.ens.w[:1], self.ens.theta[:1])
		traj = run_flow(single, self.model, self.data, self.loss, FlowConfig("rk4", step_size=0.01, t_end=1.0, record_every=100))
		np.testing.assert_allclose(traj.final.stacked()[0], ref.y[:, -1], atol=1e-7)

	def test_config_validation(self) -> None:
		with self.assertRaises(ConfigError):
			FlowConfig("midpoint")
		with self.assertRaises(ConfigError):
			FlowConfig(step_size=0.0)
		with self.assertRaises(ConfigError):
			FlowConfig(record_every=0)
		cfg = FlowConfig.from_dict({"integrator": "euler", "truncation": {"alpha": 2.0}})
		self.assertEqual(cfg.truncation, Truncation(2.0))
		self.assertEqual(FlowConfig.from_dict(cfg.to_dict()), cfg)

	def test_divergence_reasons(self) -> None:
		self.assertIsNone(_divergence_reason(np.zeros((2, 2)), 1.0))
		self.assertIn("non-finite", _divergence_reason(np.array([[np.inf, 0.0]]), 1.0))
		self.assertIn("particle norm", _divergence_reason(np.array([[1e9, 0.0]]), 1.0))
		self.assertIn("energy", _divergence_reason(np.zeros((1, 2)), 1e13))
		exc = NumericalDivergence(step=3, time=0.3, reason="x")
		self.assertIn("step 3", str(exc))


class TestFrozenResidual(unittest.TestCase):
	def test_escaping_particle_follows_the_escape_ode(self) -> None:
		# silu(0) = 0, so particles at (w, theta) = (0, 0) are stationary and
		# leave the residual to the one moving particle, whose weight is 1/m.
		data = teacher_network(20, 2, 1, seed=13)
		model = SigmoidNet(2, 1, activation="silu")
		loss = LossSpec("square", 1)
		m = 40_001
		w = np.zeros((m, 1))
		theta = np.zeros((m, 2))
		w[0] = [0.4]
		theta[0] = [0.7, -0.5]
		ens = Ensemble(w, theta)
		g = EnsembleField(ens, model, data, loss)
		ode = escape_ode_run(g, Perturbation(), w[0], theta[0], t_end=1.0, step_size=0.01)
		traj = run_flow(ens, model, data, loss, FlowConfig("rk4", step_size=0.01, t_end=1.0, record_every=100))
		final = traj.final
		np.testing.assert_allclose(final.w[0], ode.w[-1], atol=1e-4)
		np.testing.assert_allclose(final.theta[0], ode.theta[-1], atol=1e-4)
		self.assertEqual(float(np.abs(final.w[1:]).max()), 0.0)
		self.assertEqual(float(np.abs(final.theta[1:]).max()), 0.0)
		self.assertGreater(float(np.linalg.norm(ode.theta[-1] - theta[0])), 1e-3)


class TestPersistence(unittest.TestCase):
	def test_save_and_load(self) -> None:
		data = teacher_network(10, 2, 1, seed=9)
		ens = sample_ensemble(InitSpec("gaussian", 1, 2, seed=10), 4)
		traj = run_flow(ens, SigmoidNet(2, 1), data, LossSpec("square", 1), FlowConfig("euler", 0.1, 0.3, 1))
		with tempfile.TemporaryDirectory() as td:
			save_trajectory(td, traj, {"kind": "simulate"})
			back, manifest = load_trajectory(td)
		self.assertEqual(manifest["trajectory"]["n_states"], len(traj))
		self.assertEqual(back.times, traj.times)
		self.assertEqual(back.energies, traj.energies)
		self.assertTrue(all(a.same_as(b) for a, b in zip(back.states, traj.states)))

	def test_missing_section(self) -> None:
		with tempfile.TemporaryDirectory() as td:
			with self.assertRaises(ManifestError):
				load_trajectory(td)
			write_json_atomic(Path(td) / "manifest.json", {"kind": "simulate"})
			with self.assertRaises(ManifestError):
				load_trajectory(td)


if __name__ == "__main__":
	unittest.main()
