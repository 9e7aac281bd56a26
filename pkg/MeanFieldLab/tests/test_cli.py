"""End-to-end runs through the command line: exit codes, manifests and reports."""

from __future__ import annotations

import io
import json
import tempfile
import unittest
from pathlib import Path

from MeanFieldLab.cli import main, report, sparkline
from MeanFieldLab.core import EXIT_OK, EXIT_VALIDATION, EXIT_VERDICT_FAIL, ManifestError
from MeanFieldLab.workers import set_thread_cap


class CliTestCase(unittest.TestCase):
	def setUp(self) -> None:
		self._tmp = tempfile.TemporaryDirectory()
		self.tmp = Path(self._tmp.name)

	def tearDown(self) -> None:
		set_thread_cap(None)
		self._tmp.cleanup()

	def write_config(self, data: dict, name: str = "exp.jsonc") -> Path:
		path = self.tmp / name
		path.write_text("// test config\n" + json.dumps(data), encoding="utf-8")
		return path

	def manifest(self, run_dir: Path) -> dict:
		return json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))


class TestRun(CliTestCase):
	def test_w2_selftest_passes(self) -> None:
		run_dir = self.tmp / "w2"
		cfg = self.write_config({"kind": "w2-selftest", "output": str(run_dir), "params": {"instances": 12}})
		self.assertEqual(main(["run", str(cfg), "--log-level", "WARNING"]), EXIT_OK)
		m = self.manifest(run_dir)
		self.assertEqual(m["verdict"], "PASS")
		self.assertEqual(sorted(m["seeds"]), ["dataset", "init", "perturbations", "projections", "sampler"])
		self.assertEqual(m["artifacts"], ["selftest.json"])
		self.assertEqual(m["config"]["params"]["max_m"], 6)

	def test_seed_and_output_overrides(self) -> None:
		cfg = self.write_config({"kind": "w2-selftest", "output": str(self.tmp / "a"), "params": {"instances": 6}})
		other = self.tmp / "b"
		self.assertEqual(main(["run", str(cfg), "--seed", "4", "--output", str(other), "--log-level", "ERROR"]), EXIT_OK)
		self.assertEqual(self.manifest(other)["config"]["seed"], 4)
		self.assertFalse((self.tmp / "a").exists())

	def test_zero_field_fails_with_verdict_code(self) -> None:
		run_dir = self.tmp / "zero"
		cfg = self.write_config(
			{"kind": "escape-scalar", "output": str(run_dir), "params": {"field": {"name": "zero", "d_theta": 2}, "n_boundary": 50}}
		)
		self.assertEqual(main(["run", str(cfg), "--log-level", "ERROR"]), EXIT_VERDICT_FAIL)
		m = self.manifest(run_dir)
		self.assertEqual(m["verdict"], "FAIL")
		self.assertIn("reason", m["summary"])
		self.assertIn("escape_report.json", m["artifacts"])

	def test_simulate_writes_trajectory(self) -> None:
		run_dir = self.tmp / "sim"
		cfg = self.write_config(
			{
				"kind": "simulate",
				"output": str(run_dir),
				"dataset": {"n_samples": 20, "d_in": 2, "d_out": 1, "width": 3},
				"init": {"m": 6},
				"flow": {"step_size": 0.05, "t_end": 0.2, "record_every": 2},
			}
		)
		self.assertEqual(main(["run", str(cfg), "--threads", "1", "--log-level", "ERROR"]), EXIT_OK)
		m = self.manifest(run_dir)
		self.assertEqual(m["verdict"], "OK")
		self.assertEqual(m["trajectory"]["n_states"], 3)
		self.assertTrue(m["summary"]["energy_monotone"])
		self.assertIn("scalars.csv", m["artifacts"])
		self.assertNotIn("energy_ratio_target", m["summary"])
		out = io.StringIO()
		self.assertEqual(report(run_dir, out), EXIT_OK)
		text = out.getvalue()
		self.assertTrue(text.startswith("simulate run in"))
		self.assertIn("verdict     OK", text)
		self.assertIn("scalars.csv", text)

	def test_simulate_energy_target_sets_the_verdict(self) -> None:
		base = {
			"kind": "simulate",
			"dataset": {"n_samples": 20, "d_in": 2, "d_out": 1, "width": 3},
			"init": {"m": 6},
			"flow": {"step_size": 0.05, "t_end": 0.2, "record_every": 2},
		}
		for name, target, verdict, code in [("loose", 1.0, "PASS", EXIT_OK), ("tight", 1e-9, "FAIL", EXIT_VERDICT_FAIL)]:
			run_dir = self.tmp / name
			cfg = self.write_config({**base, "output": str(run_dir), "params": {"energy_ratio_target": target}}, f"{name}.json")
			self.assertEqual(main(["run", str(cfg), "--threads", "1", "--log-level", "ERROR"]), code)
			m = self.manifest(run_dir)
			self.assertEqual(m["verdict"], verdict)
			self.assertEqual(m["summary"]["energy_ratio_target"], target)
			self.assertEqual(m["summary"]["energy_ratio_met"], verdict == "PASS")
			out = io.StringIO()
			report(run_dir, out)
			self.assertIn("met" if verdict == "PASS" else "not met", out.getvalue())

	def test_hardmax_verdict_follows_the_rate_check(self) -> None:
		run_dir = self.tmp / "hm"
		cfg = self.write_config(
			{"kind": "hardmax-scan", "output": str(run_dir), "params": {"n_contexts": 10000, "directions": 8}}
		)
		code = main(["run", str(cfg), "--threads", "1", "--log-level", "ERROR"])
		s = self.manifest(run_dir)["summary"]
		expected = s["hull_ok"] and s["strictly_decreasing"] and s["rate_check"]["pass"]
		self.assertEqual(self.manifest(run_dir)["verdict"], "PASS" if expected else "FAIL")
		self.assertEqual(code, EXIT_OK if expected else EXIT_VERDICT_FAIL)
		self.assertEqual(s["rate_check"]["r"], [10.0, 100.0, 1000.0])
		self.assertNotIn("gap_threshold", s)
		self.assertEqual(s["target_gap"], 1e-2)
		self.assertFalse(s["target_gap_reached"])
		self.assertGreater(s["r_for_target_gap"], 1000.0)
		out = io.StringIO()
		report(run_dir, out)
		self.assertIn("sqrt(log r / r)", out.getvalue())

	def test_invalid_configs_exit_with_validation_code(self) -> None:
		bad_kind = self.write_config({"kind": "train"}, "bad_kind.json")
		self.assertEqual(main(["run", str(bad_kind), "--log-level", "ERROR"]), EXIT_VALIDATION)
		self.assertEqual(main(["run", str(self.tmp / "missing.json"), "--log-level", "ERROR"]), EXIT_VALIDATION)
		bad_field = self.write_config(
			{"kind": "escape-scalar", "output": str(self.tmp / "bf"), "params": {"field": {"name": "spiral"}}}, "bad_field.json"
		)
		self.assertEqual(main(["run", str(bad_field), "--log-level", "ERROR"]), EXIT_VALIDATION)

	def test_thread_cap_validation(self) -> None:
		cfg = self.write_config({"kind": "w2-selftest", "output": str(self.tmp / "t")})
		self.assertEqual(main(["run", str(cfg), "--threads", "0", "--log-level", "ERROR"]), EXIT_VALIDATION)


class TestReport(CliTestCase):
	def test_report_w2_run(self) -> None:
		run_dir = self.tmp / "w2"
		cfg = self.write_config({"kind": "w2-selftest", "output": str(run_dir), "params": {"instances": 6}})
		main(["run", str(cfg), "--log-level", "ERROR"])
		out = io.StringIO()
		self.assertEqual(report(run_dir, out), EXIT_OK)
		self.assertIn("w2-selftest run in", out.getvalue())
		self.assertIn("selftest.json", out.getvalue())
		self.assertEqual(main(["report", str(run_dir), "--log-level", "ERROR"]), EXIT_OK)

	def test_missing_manifest(self) -> None:
		with self.assertRaises(ManifestError):
			report(self.tmp, io.StringIO())
		self.assertEqual(main(["report", str(self.tmp), "--log-level", "ERROR"]), EXIT_VALIDATION)

	def test_incomplete_summary(self) -> None:
		(self.tmp / "manifest.json").write_text(json.dumps({"kind": "hardmax-scan", "verdict": "PASS", "summary": {}}), encoding="utf-8")
		with self.assertRaises(ManifestError):
			report(self.tmp, io.StringIO())


class TestSelftestCommand(unittest.TestCase):
	def test_quick_selftest_passes(self) -> None:
		self.assertEqual(main(["selftest", "--log-level", "ERROR"]), EXIT_OK)


class TestSparkline(unittest.TestCase):
	def test_scaling(self) -> None:
		self.assertEqual(sparkline([0.0, 1.0]), "▁█")
		self.assertEqual(sparkline([2.0, 2.0]), "▁▁")
		self.assertEqual(sparkline([0.0, float("nan"), 1.0]), "▁ █")
		self.assertEqual(sparkline([]), "")


if __name__ == "__main__":
	unittest.main()
