"""Tests for the developer-mode switch: env flag, config flag and numpy tracing."""

from __future__ import annotations

import logging
import os
import unittest
from types import SimpleNamespace
from unittest import mock

import numpy as np

from MeanFieldLab.developer_mode import (
	apply_log_verbosity,
	developer_mode_status_text,
	is_developer_mode,
	numpy_tracing_active,
)


class TestDeveloperMode(unittest.TestCase):
	def tearDown(self) -> None:
		apply_log_verbosity(enabled=False)

	def test_env_flag_wins(self) -> None:
		with mock.patch.dict(os.environ, {"MEANFIELDLAB_DEV": "yes"}):
			self.assertTrue(is_developer_mode(None))
			self.assertIn("MEANFIELDLAB_DEV", developer_mode_status_text(None))
		with mock.patch.dict(os.environ, {"MEANFIELDLAB_DEV": "0"}):
			self.assertFalse(is_developer_mode(None))

	def test_config_flag(self) -> None:
		with mock.patch.dict(os.environ, {}, clear=True):
			self.assertTrue(is_developer_mode(SimpleNamespace(developer_mode=True)))
			self.assertFalse(is_developer_mode(SimpleNamespace()))
			self.assertEqual(developer_mode_status_text(None), "Developer mode: off | Logging: normal")

	def test_tracing_routes_numpy_events_to_log(self) -> None:
		before = np.geterr()
		apply_log_verbosity(enabled=True)
		self.assertTrue(numpy_tracing_active())
		self.assertEqual(logging.getLogger("MeanFieldLab.flow").level, logging.DEBUG)
		with self.assertLogs("MeanFieldLab.numerics", "DEBUG") as cm:
			np.array([1.0]) / np.array([0.0])
		self.assertIn("divide", cm.output[0])

		apply_log_verbosity(enabled=False)
		self.assertFalse(numpy_tracing_active())
		self.assertEqual(np.geterr(), before)

	def test_enabling_twice_keeps_original_state(self) -> None:
		before = np.geterr()
		apply_log_verbosity(enabled=True)
		apply_log_verbosity(enabled=True)
		apply_log_verbosity(enabled=False)
		self.assertEqual(np.geterr(), before)


if __name__ == "__main__":
	unittest.main()
