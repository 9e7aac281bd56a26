"""Tests for the binary and CSV ensemble files."""

from __future__ import annotations

import struct
import tempfile
import unittest
from pathlib import Path

import numpy as np

from MeanFieldLab.measure import (
	CURRENT_ENSEMBLE_FORMAT,
	InitSpec,
	InvalidEnsemble,
	UnsupportedEnsembleFormat,
	read_ensemble_binary,
	read_ensemble_csv,
	sample_ensemble,
	write_ensemble_binary,
	write_ensemble_csv,
)
from MeanFieldLab.measure.codec import csv_header, ensemble_from_bytes, ensemble_from_csv, ensemble_to_bytes
from MeanFieldLab.measure.format_registry import HEADER, MAGIC, parse_header


class TestBinaryFormat1(unittest.TestCase):
	def setUp(self) -> None:
		self.ens = sample_ensemble(InitSpec("gaussian", 2, 3, seed=5), 17)

	def test_header_layout(self) -> None:
		raw = ensemble_to_bytes(self.ens)
		self.assertEqual(HEADER.size, 16)
		self.assertEqual(raw[:4], MAGIC)
		magic, version, dtype, m, d_w, d_theta = HEADER.unpack_from(raw, 0)
		self.assertEqual((version, dtype, m, d_w, d_theta), (CURRENT_ENSEMBLE_FORMAT, 0, 17, 2, 3))
		self.assertEqual(len(raw), 16 + 17 * 5 * 8)

	def test_file_is_bit_exact(self) -> None:
		with tempfile.TemporaryDirectory() as td:
			p = Path(td) / "sub" / "e.mfe"
			write_ensemble_binary(p, self.ens)
			self.assertTrue(read_ensemble_binary(p).same_as(self.ens))
			self.assertFalse(p.with_name("e.mfe.part").exists())

	def test_rejects_bad_files(self) -> None:
		raw = ensemble_to_bytes(self.ens)
		with self.assertRaises(InvalidEnsemble):
			ensemble_from_bytes(b"XXXX" + raw[4:])
		with self.assertRaises(InvalidEnsemble):
			ensemble_from_bytes(raw[:10])
		with self.assertRaises(InvalidEnsemble):
			ensemble_from_bytes(raw[:-8])
		bumped = struct.pack("<4sH", MAGIC, 2) + raw[6:]
		with self.assertRaises(UnsupportedEnsembleFormat):
			ensemble_from_bytes(bumped, path="future.mfe")
		wrong_dtype = raw[:6] + struct.pack("<H", 3) + raw[8:]
		with self.assertRaises(InvalidEnsemble):
			ensemble_from_bytes(wrong_dtype)

	def test_parse_header_fields(self) -> None:
		head = parse_header(ensemble_to_bytes(self.ens))
		self.assertEqual((head.version, head.m, head.d_w, head.d_theta), (CURRENT_ENSEMBLE_FORMAT, 17, 2, 3))
		self.assertEqual(head.payload_size, 17 * 5 * 8)


class TestCsv(unittest.TestCase):
	def test_header_names(self) -> None:
		self.assertEqual(csv_header(1, 2), "w_0,theta_0,theta_1")

	def test_file_preserves_values(self) -> None:
		ens = sample_ensemble(InitSpec("uniform-ball", 1, 2, seed=6), 9)
		with tempfile.TemporaryDirectory() as td:
			p = Path(td) / "e.csv"
			write_ensemble_csv(p, ens)
			back = read_ensemble_csv(p)
		np.testing.assert_array_equal(back.stacked(), ens.stacked())

	def test_single_row_and_bad_header(self) -> None:
		ens = ensemble_from_csv("w_0,theta_0\n1.5,-2\n")
		self.assertEqual(ens.m, 1)
		with self.assertRaises(InvalidEnsemble):
			ensemble_from_csv("a,b\n1,2\n")
		with self.assertRaises(InvalidEnsemble):
			ensemble_from_csv("")


if __name__ == "__main__":
	unittest.main()
