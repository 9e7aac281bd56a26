"""Tests for datasets, their CSV form and the synthetic generators."""

from __future__ import annotations

import json
import tempfile
import unittest
from pathlib import Path

import numpy as np

from MeanFieldLab.models.dataset import (
	Dataset,
	DatasetError,
	attention_contexts,
	dataset_from_config,
	gaussian_mixture,
	load_dataset_csv,
	manifest_path_for,
	save_dataset_csv,
	teacher_network,
)


class TestDataset(unittest.TestCase):
	def test_validation(self) -> None:
		with self.assertRaises(DatasetError):
			Dataset(np.zeros((3, 2)), np.zeros((2, 1)))
		with self.assertRaises(DatasetError):
			Dataset(np.array([[np.nan, 0.0]]), np.zeros((1, 1)))
		with self.assertRaises(DatasetError):
			Dataset(np.zeros((2, 5)), np.zeros((2, 1)), n_tokens=2)

	def test_read_only_and_contexts(self) -> None:
		data = Dataset(np.arange(12.0).reshape(2, 6), np.zeros((2, 1)), n_tokens=3)
		self.assertFalse(data.inputs.flags.writeable)
		self.assertEqual(data.contexts().shape, (2, 3, 2))
		self.assertEqual(data.token_dim, 2)
		self.assertEqual(data.subset([1]).N, 1)
		with self.assertRaises(DatasetError):
			Dataset(np.zeros((2, 2)), np.zeros((2, 1))).contexts()


class TestCsv(unittest.TestCase):
	def test_round_trip_with_tokens(self) -> None:
		data = attention_contexts(5, 2, 3, 2, seed=1)
		with tempfile.TemporaryDirectory() as tmp:
			path = Path(tmp) / "ctx.csv"
			save_dataset_csv(path, data)
			self.assertTrue(manifest_path_for(path).name == "ctx.manifest.json")
			back = load_dataset_csv(path)
			np.testing.assert_array_equal(back.inputs, data.inputs)
			np.testing.assert_array_equal(back.labels, data.labels)
			self.assertEqual(back.n_tokens, 3)
			self.assertEqual(dataset_from_config({"source": str(path)}, 0).N, 5)

	def test_bad_files(self) -> None:
		with tempfile.TemporaryDirectory() as tmp:
			path = Path(tmp) / "d.csv"
			with self.assertRaises(DatasetError):
				load_dataset_csv(path)
			path.write_text("1,2,3\n", encoding="utf-8")
			with self.assertRaises(DatasetError):
				load_dataset_csv(path)
			manifest_path_for(path).write_text(json.dumps({"d_in": 1, "d_out": 1}), encoding="utf-8")
			with self.assertRaises(DatasetError):
				load_dataset_csv(path)
			manifest_path_for(path).write_text("{}", encoding="utf-8")
			with self.assertRaises(DatasetError):
				load_dataset_csv(path)
			manifest_path_for(path).write_text(json.dumps({"d_in": 2, "d_out": 1}), encoding="utf-8")
			self.assertEqual(load_dataset_csv(path).d_in, 2)


class TestGenerators(unittest.TestCase):
	def test_shapes_and_determinism(self) -> None:
		a = teacher_network(10, 3, 2, seed=4, width=5)
		self.assertEqual((a.N, a.d_in, a.d_out), (10, 3, 2))
		np.testing.assert_array_equal(a.labels, teacher_network(10, 3, 2, seed=4, width=5).labels)
		mix = gaussian_mixture(12, 2, 3, seed=1)
		np.testing.assert_array_equal(mix.labels.sum(axis=1), np.ones(12))
		ctx = attention_contexts(4, 2, 3, 1, seed=2)
		self.assertEqual((ctx.d_in, ctx.n_tokens, ctx.d_out), (6, 3, 1))

	def test_from_config(self) -> None:
		data = dataset_from_config({"generator": "gaussian-mixture", "n_samples": 7, "d_in": 2, "d_out": 3}, 0)
		self.assertEqual((data.N, data.d_out), (7, 3))
		self.assertEqual(dataset_from_config({"generator": "attention-contexts", "n_samples": 3}, 0).n_tokens, 3)
		with self.assertRaises(DatasetError):
			dataset_from_config({"generator": "spirals"}, 0)


if __name__ == "__main__":
	unittest.main()
