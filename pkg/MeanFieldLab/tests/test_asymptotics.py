"""Tests for the sphere sampler, the hardmax scan, the sigmoid limits and the attention explorer."""

from __future__ import annotations

import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from MeanFieldLab.asymptotics import (
	CONJECTURE_LABEL,
	ConvergenceScan,
	CustomDensity,
	GaussianDensity,
	SphereSampler,
	StudentDensity,
	UndeclaredDecay,
	attention_gradient_limit_explore,
	check_r_grid,
	context_function,
	density_from_config,
	direction_gaps,
	halfspace_asymptote,
	hardmax_convergence_scan,
	rate_check,
	require_decay,
	scalar_function,
	sigmoid_gradient_limit_check,
	sigmoid_halfspace_check,
	tie_band_rate,
	write_gnuplot_dat,
	write_scan_csv,
)

# One context: two key tokens and a query that dominates its own score.
CONTEXTS = np.array([[[1.0, 0.0], [0.0, 1.0], [2.0, 0.0]]])


class TestSphereSampler(unittest.TestCase):
	def test_stratified_appends_axes(self) -> None:
		pts = SphereSampler(4, 10, seed=1).sample()
		self.assertEqual(pts.shape, (18, 4))
		np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0)
		np.testing.assert_array_equal(pts[10:14], np.eye(4))

	def test_uniform_and_degenerate_dimension(self) -> None:
		self.assertEqual(SphereSampler(3, 7, kind="uniform").sample().shape, (7, 3))
		np.testing.assert_array_equal(SphereSampler(1, 5).sample(), [[1.0], [-1.0]])
		np.testing.assert_array_equal(SphereSampler(3, 7, seed=4).sample(), SphereSampler(3, 7, seed=4).sample())

	def test_matrices(self) -> None:
		mats = SphereSampler(4, 6, seed=2).matrices(2)
		self.assertEqual(mats.shape, (14, 2, 2))
		np.testing.assert_allclose(np.linalg.norm(mats, axis=(1, 2)), 1.0)
		with self.assertRaises(ValueError):
			SphereSampler(4, 6).matrices(3)

	def test_validation(self) -> None:
		with self.assertRaises(ValueError):
			SphereSampler(3, 5, kind="fibonacci")
		with self.assertRaises(ValueError):
			SphereSampler(0, 5)


class TestRGrid(unittest.TestCase):
	def test_check_r_grid(self) -> None:
		np.testing.assert_array_equal(check_r_grid([0, 1, 10]), [0.0, 1.0, 10.0])
		for bad in ([], [1.0, 1.0], [2.0, 1.0], [-1.0, 1.0]):
			with self.assertRaises(ValueError):
				check_r_grid(bad)
		with self.assertRaises(ValueError):
			check_r_grid([0.0, 1.0], allow_zero=False)


class TestHardmaxScan(unittest.TestCase):
	def test_gap_decreases_to_zero(self) -> None:
		A = np.eye(2)[None, :, :] / math.sqrt(2.0)
		scan = hardmax_convergence_scan(CONTEXTS, A, [0.0, 1.0, 10.0, 100.0], threads=1)
		self.assertTrue(scan.hull_ok)
		self.assertTrue(np.all(np.diff(scan.sup_gaps) < 0))
		self.assertTrue(scan.non_increasing())
		self.assertLess(scan.sup_gaps[-1], 1e-12)
		# r = 0 averages the tokens uniformly: (1, 1/3) against the query (2, 0).
		self.assertAlmostEqual(scan.sup_gaps[0], math.hypot(1.0, 1.0 / 3.0), places=12)
		self.assertEqual(len(scan.rows()), 4)

	def test_sampled_directions(self) -> None:
		scan = hardmax_convergence_scan(CONTEXTS, SphereSampler(4, 6, seed=1), [0.0, 5.0], threads=2)
		self.assertEqual(scan.gaps.shape, (14, 2))
		np.testing.assert_array_equal(scan.sup_gaps, scan.gaps.max(axis=0))
		self.assertTrue(scan.to_dict()["sup_is_lower_bound"])

	def test_rank_one_direction_decays_at_the_tie_band_rate(self) -> None:
		contexts = np.random.default_rng(5).standard_normal((200000, 3, 2))
		r = np.array([100.0, 1000.0])
		rank_one, _, _ = direction_gaps(np.outer([1.0, 0.0], [1.0, 0.0]), contexts, r)
		full, _, _ = direction_gaps(np.eye(2) / math.sqrt(2.0), contexts, r)
		predicted = float(tie_band_rate(1000.0) / tie_band_rate(100.0))
		self.assertAlmostEqual(predicted, 0.3873, places=3)
		self.assertTrue(0.33 < rank_one[1] / rank_one[0] < 0.45)
		# full rank: r^(-1/2), ratio sqrt(1/10)
		self.assertTrue(0.26 < full[1] / full[0] < 0.37)
		self.assertLess(full[1] / full[0], rank_one[1] / rank_one[0])

	def test_rejects_bad_contexts(self) -> None:
		with self.assertRaises(ValueError):
			hardmax_convergence_scan(np.zeros((3, 2)), SphereSampler(4, 2), [0.0, 1.0])

	def test_writers(self) -> None:
		A = np.eye(2)[None, :, :] / math.sqrt(2.0)
		scan = hardmax_convergence_scan(CONTEXTS, A, [0.0, 1.0], threads=1)
		with tempfile.TemporaryDirectory() as tmp:
			csv_path = Path(tmp) / "scan.csv"
			dat_path = Path(tmp) / "plots" / "scan.dat"
			write_scan_csv(csv_path, scan)
			write_gnuplot_dat(dat_path, {"r": scan.r_grid, "sup_gap": scan.sup_gaps}, title="hardmax")
			lines = csv_path.read_text(encoding="utf-8").splitlines()
			self.assertEqual(lines[0], "r,direction_id,gap,stderr")
			self.assertEqual(len(lines), 3)
			dat = dat_path.read_text(encoding="utf-8").splitlines()
			self.assertEqual(dat[:2], ["# hardmax", "# r sup_gap"])
			self.assertEqual(len(dat), 4)


def synthetic_scan(r_grid, sup_gaps) -> ConvergenceScan:
	r = np.asarray(r_grid, dtype=np.float64)
	gaps = np.asarray(sup_gaps, dtype=np.float64)
	return ConvergenceScan(r, gaps, np.zeros_like(gaps), np.zeros(r.shape[0], dtype=int), gaps[None, :], np.zeros((1, r.shape[0])), True, 1)


class TestRateCheck(unittest.TestCase):
	R = [1.0, 10.0, 100.0, 1000.0]

	def test_gaps_on_the_rate_pass(self) -> None:
		gaps = [0.83] + [0.7 * float(tie_band_rate(r)) for r in self.R[1:]]
		rc = rate_check(synthetic_scan(self.R, gaps))
		self.assertTrue(rc.passed)
		np.testing.assert_array_equal(rc.r, [10.0, 100.0, 1000.0])
		np.testing.assert_allclose(rc.constants, 0.7)
		self.assertAlmostEqual(rc.predicted_gap(1000.0), gaps[-1])
		r_star = rc.r_for_gap(1e-2)
		self.assertAlmostEqual(0.7 * math.sqrt(math.log(r_star) / r_star), 1e-2, places=9)
		self.assertGreater(r_star, 1e4)
		self.assertEqual(rc.r_for_gap(0.5), 1000.0)
		self.assertTrue(rc.to_dict()["pass"])

	def test_slower_decay_fails(self) -> None:
		gaps = [0.83] + [0.7 * (math.log(r) / r) ** 0.25 for r in self.R[1:]]
		rc = rate_check(synthetic_scan(self.R, gaps))
		self.assertFalse(rc.passed)
		self.assertGreater(rc.exponent, -0.3)

	def test_needs_two_asymptotic_points(self) -> None:
		with self.assertRaises(ValueError):
			rate_check(synthetic_scan([1.0, 10.0], [0.8, 0.5]))
		with self.assertRaises(ValueError):
			tie_band_rate([1.0, 10.0])
		with self.assertRaises(ValueError):
			rate_check(synthetic_scan(self.R, [0.8, 0.5, 0.2, 0.1])).r_for_gap(0.0)


class TestSigmoidLimits(unittest.TestCase):
	def setUp(self) -> None:
		self.samples = GaussianDensity(2).sample_antithetic(2000, np.random.default_rng(3))

	def test_halfspace_identity_at_zero_and_convergence(self) -> None:
		table = sigmoid_halfspace_check(scalar_function("one"), [3.0, 4.0], [0.0, 1.0, 1e6], samples=self.samples)
		self.assertEqual(table.rows[0].limit, 0.5)
		self.assertEqual(table.rows[0].finite, 0.5)
		self.assertEqual(table.rows[0].gap, 0.0)
		self.assertLess(table.last.gap, 1e-3)
		self.assertTrue(table.to_dict()["last_within_3_stderr"])

	def test_halfspace_errors(self) -> None:
		with self.assertRaises(ValueError):
			sigmoid_halfspace_check(scalar_function("one"), [1.0, 0.0, 0.0], [1.0], samples=self.samples)
		with self.assertRaises(ValueError):
			sigmoid_halfspace_check(scalar_function("one"), [1.0, 0.0], [1.0])
		with self.assertRaises(ValueError):
			sigmoid_halfspace_check(scalar_function("one"), [0.0, 0.0], [1.0], samples=self.samples)
		with self.assertRaises(ValueError):
			scalar_function("cube")

	def test_gradient_limit_pairs_samples(self) -> None:
		table = sigmoid_gradient_limit_check(
			scalar_function("tanh-first"), GaussianDensity(2), [0.6, 0.8], [10.0, 1e4], n_samples=20_000, seed=5
		)
		self.assertEqual(len(table.rows), 2)
		self.assertLessEqual(table.last.gap, 3.0 * table.last.stderr)
		self.assertLess(table.last.gap, table.rows[0].gap)

	def test_decay_requirements(self) -> None:
		custom = CustomDensity(2, lambda n, rng: rng.standard_normal((n, 2)), lambda X: np.zeros(X.shape[0]))
		with self.assertRaises(UndeclaredDecay):
			require_decay(custom, 2)
		with self.assertRaises(UndeclaredDecay):
			require_decay(CustomDensity(2, custom._sampler, custom._logpdf, decay_exponent=2.0), 2)
		self.assertEqual(require_decay(StudentDensity(2, 3.0), 2), 5.0)
		with self.assertRaises(UndeclaredDecay):
			sigmoid_gradient_limit_check(scalar_function("one"), custom, [1.0, 0.0], [1.0], n_samples=10)
		with self.assertRaises(UndeclaredDecay):
			density_from_config({"kind": "custom"}, 2)
		self.assertIsInstance(density_from_config({"kind": "student", "df": 4}, 3), StudentDensity)

	def test_halfspace_asymptote(self) -> None:
		ginf = halfspace_asymptote(scalar_function("one"), GaussianDensity(2), n_samples=20_000, n_surface=2000, seed=1)
		phi = np.array([0.6, 0.8])
		self.assertAlmostEqual(ginf.value(phi), 0.5, delta=0.02)
		self.assertEqual(ginf.value(phi), ginf.value(phi))


class TestAttentionExplorer(unittest.TestCase):
	def test_zero_function_has_zero_limit(self) -> None:
		report = attention_gradient_limit_explore(
			context_function("zero"), 2.0 * np.eye(2), [1.0, 10.0], n=3, n_samples=500, seed=2
		)
		self.assertEqual(report.label, CONJECTURE_LABEL)
		self.assertEqual(report.label, "CONJECTURE")
		self.assertAlmostEqual(float(np.linalg.norm(report.A)), 1.0, places=12)
		np.testing.assert_array_equal(report.limit, np.zeros((2, 2)))
		self.assertEqual([row.gap for row in report.rows], [0.0, 0.0])
		self.assertEqual(report.to_dict()["label"], "CONJECTURE")
		self.assertGreaterEqual(report.skipped_fraction, 0.0)
		self.assertLessEqual(report.skipped_fraction, 1.0)

	def test_finite_estimates_have_matrix_shape(self) -> None:
		report = attention_gradient_limit_explore(
			context_function("tanh-first-token"), np.eye(2), [2.0, 20.0], n=3, n_samples=400, seed=3
		)
		self.assertEqual(report.limit.shape, (2, 2))
		self.assertTrue(all(row.finite.shape == (2, 2) for row in report.rows))
		self.assertEqual(len(report.consecutive_gaps), 1)

	def test_validation(self) -> None:
		f = context_function("zero")
		with self.assertRaises(ValueError):
			attention_gradient_limit_explore(f, np.ones((2, 3)), [1.0], n=3, n_samples=10)
		with self.assertRaises(ValueError):
			attention_gradient_limit_explore(f, np.zeros((2, 2)), [1.0], n=3, n_samples=10)
		with self.assertRaises(ValueError):
			attention_gradient_limit_explore(f, np.eye(2), [0.0, 1.0], n=3, n_samples=10)
		with self.assertRaises(ValueError):
			context_function("mean")


if __name__ == "__main__":
	unittest.main()
