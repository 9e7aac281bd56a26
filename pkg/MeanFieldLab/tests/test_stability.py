"""Tests for the growth-rate fit and the small-versus-large stability experiment."""

from __future__ import annotations

import math
import unittest

import numpy as np

from MeanFieldLab.flow import FlowConfig, fit_growth_rate, independent_pair_distances, stability_experiment
from MeanFieldLab.losses import LossSpec
from MeanFieldLab.measure import InitSpec
from MeanFieldLab.models import SigmoidNet
from MeanFieldLab.models.dataset import teacher_network


class TestGrowthRate(unittest.TestCase):
	def test_exact_exponential(self) -> None:
		t = np.linspace(0.0, 2.0, 9)
		lsq, env = fit_growth_rate(t, 0.3 * np.exp(0.5 * t))
		self.assertAlmostEqual(lsq, 0.5, places=10)
		self.assertAlmostEqual(env, 0.5, places=10)

	def test_envelope_dominates(self) -> None:
		t = [0.0, 1.0, 2.0, 3.0]
		d = [1.0, math.e**2, math.e**2, math.e**2]
		lsq, env = fit_growth_rate(t, d)
		self.assertAlmostEqual(env, 2.0)
		self.assertLess(lsq, env)

	def test_zero_start(self) -> None:
		self.assertEqual(fit_growth_rate([0.0, 1.0], [0.0, 0.5]), (0.0, 0.0))
		self.assertEqual(fit_growth_rate([], []), (0.0, 0.0))


class TestStabilityExperiment(unittest.TestCase):
	def setUp(self) -> None:
		self.data = teacher_network(20, 2, 1, seed=1)
		self.model = SigmoidNet(2, 1)
		self.loss = LossSpec("square", 1)
		self.spec = InitSpec("gaussian", 1, 2, seed=2)
		self.cfg = FlowConfig("euler", step_size=0.1, t_end=1.0, record_every=5)

	def test_bound_holds_with_fitted_rate(self) -> None:
		res = stability_experiment(self.spec, 4, 16, self.model, self.data, self.loss, self.cfg)
		self.assertEqual(len(res.times), 3)
		self.assertEqual(res.methods, ["exact"] * 3)
		self.assertGreater(res.distances[0], 0.0)
		self.assertTrue(res.bound_holds)
		self.assertGreaterEqual(res.rate_envelope, res.rate_lsq)
		self.assertEqual(res.to_dict()["table"][0]["t"], 0.0)

	def test_equal_sizes_give_zero_distance(self) -> None:
		res = stability_experiment(self.spec, 8, 8, self.model, self.data, self.loss, self.cfg)
		self.assertTrue(all(d == 0.0 for d in res.distances))
		self.assertEqual((res.rate_lsq, res.rate_envelope), (0.0, 0.0))
		self.assertTrue(res.bound_holds)

	def test_sizes_must_divide(self) -> None:
		with self.assertRaises(ValueError):
			stability_experiment(self.spec, 3, 8, self.model, self.data, self.loss, self.cfg)

	def test_independent_pairs(self) -> None:
		out = independent_pair_distances(self.spec, [4, 8], self.model, self.data, self.loss, self.cfg)
		self.assertEqual(sorted(out), [4, 8])
		self.assertTrue(all(v > 0.0 for v in out.values()))

	def test_independent_pairs_shrink_with_m(self) -> None:
		sizes = [8, 64, 512]
		totals = dict.fromkeys(sizes, 0.0)
		for seed in (2, 3, 4, 5):
			spec = InitSpec("gaussian", 1, 2, seed=seed)
			for m, d in independent_pair_distances(spec, sizes, self.model, self.data, self.loss, self.cfg).items():
				totals[m] += d / 4.0
		means = [totals[m] for m in sizes]
		self.assertTrue(all(b < a for a, b in zip(means, means[1:])), means)
		slope = np.polyfit(np.log(sizes), np.log(means), 1)[0]
		self.assertLess(slope, -0.1)


if __name__ == "__main__":
	unittest.main()
