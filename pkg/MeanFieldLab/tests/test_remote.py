"""Dataset fetching against a fake HTTP session."""

from __future__ import annotations

import hashlib
import tempfile
import unittest
from pathlib import Path

import numpy as np
import requests

from MeanFieldLab.models.dataset import Dataset, DatasetError, load_dataset_csv, manifest_path_for, save_dataset_csv
from MeanFieldLab.models.remote import MAX_ATTEMPTS, cache_path_for, download_file, fetch_dataset, manifest_url_for

URL = "https://data.example.org/sets/teacher.csv?rev=2"


class FakeResponse:
	def __init__(self, status: int, content: bytes) -> None:
		self.status_code = status
		self.content = content

	def raise_for_status(self) -> None:
		if self.status_code >= 400:
			raise requests.HTTPError(f"{self.status_code} error")


class FakeSession:
	"""Serves ``routes[url]``, a list of responses consumed in order (the last one repeats)."""

	def __init__(self, routes: dict) -> None:
		self.routes = routes
		self.calls: list = []

	def get(self, url, headers=None, timeout=None):
		self.calls.append(url)
		queue = self.routes.get(url)
		if not queue:
			raise requests.ConnectionError(f"no route to {url}")
		return queue.pop(0) if len(queue) > 1 else queue[0]


class TestUrls(unittest.TestCase):
	def test_manifest_url(self) -> None:
		self.assertEqual(manifest_url_for(URL), "https://data.example.org/sets/teacher.manifest.json?rev=2")
		self.assertEqual(manifest_url_for("http://h/data"), "http://h/data.manifest.json")

	def test_cache_path(self) -> None:
		digest = hashlib.sha256(URL.encode("utf-8")).hexdigest()[:16]
		self.assertEqual(cache_path_for(URL, Path("cache")), Path("cache") / digest / "teacher.csv")
		self.assertEqual(cache_path_for("https://h/", Path("c")).name, "dataset.csv")
		self.assertEqual(cache_path_for("https://h/raw", Path("c")).name, "raw.csv")


class TestDownload(unittest.TestCase):
	def test_retries_then_succeeds(self) -> None:
		sleeps = []
		session = FakeSession({URL: [FakeResponse(503, b""), FakeResponse(200, b""), FakeResponse(200, b"1,2\n")]})
		with tempfile.TemporaryDirectory() as tmp:
			dest = Path(tmp) / "d" / "x.csv"
			download_file(session, URL, dest, sleep=sleeps.append)
			self.assertEqual(dest.read_bytes(), b"1,2\n")
			self.assertFalse(dest.with_name("x.csv.part").exists())
		self.assertEqual(len(session.calls), 3)
		self.assertEqual(sleeps, [0.4, 0.8])

	def test_gives_up_after_max_attempts(self) -> None:
		sleeps = []
		session = FakeSession({URL: [FakeResponse(500, b"")]})
		with tempfile.TemporaryDirectory() as tmp:
			dest = Path(tmp) / "x.csv"
			with self.assertRaises(DatasetError):
				download_file(session, URL, dest, sleep=sleeps.append)
			self.assertFalse(dest.exists())
		self.assertEqual(len(session.calls), MAX_ATTEMPTS)
		self.assertEqual(len(sleeps), MAX_ATTEMPTS - 1)


class TestFetchDataset(unittest.TestCase):
	def test_fetch_then_cache_hit(self) -> None:
		data = Dataset(np.arange(6.0).reshape(3, 2), np.array([[0.5], [1.5], [2.5]]))
		with tempfile.TemporaryDirectory() as tmp:
			src = Path(tmp) / "src" / "teacher.csv"
			save_dataset_csv(src, data)
			session = FakeSession(
				{
					URL: [FakeResponse(200, src.read_bytes())],
					manifest_url_for(URL): [FakeResponse(200, manifest_path_for(src).read_bytes())],
				}
			)
			cache = Path(tmp) / "cache"
			path = fetch_dataset(URL, cache, session=session)
			self.assertEqual(path, cache_path_for(URL, cache))
			loaded = load_dataset_csv(path)
			np.testing.assert_array_equal(loaded.inputs, data.inputs)
			np.testing.assert_array_equal(loaded.labels, data.labels)
			self.assertEqual(len(session.calls), 2)
			self.assertEqual(fetch_dataset(URL, cache, session=session), path)
			self.assertEqual(len(session.calls), 2)
			fetch_dataset(URL, cache, session=session, refresh=True)
			self.assertEqual(len(session.calls), 4)


if __name__ == "__main__":
	unittest.main()
