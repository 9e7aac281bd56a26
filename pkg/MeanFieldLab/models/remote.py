"""Fetch CSV datasets (and their sidecar manifests) from http(s) sources into a local cache."""

from __future__ import annotations

import hashlib
import logging
import time
import urllib.parse
from pathlib import Path
from typing import Optional

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from .dataset import DatasetError, manifest_path_for

logger = logging.getLogger(__name__)

USER_AGENT = "MeanFieldLab/1.0 (dataset fetch)"
MAX_ATTEMPTS = 4


def make_http_session() -> requests.Session:
	"""Session with automatic retries for transient failures."""

	s = requests.Session()
	retry = Retry(
		total=2,
		connect=2,
		read=2,
		redirect=5,
		backoff_factor=0.35,
		status_forcelist=(408, 429, 500, 502, 503, 504),
		allowed_methods=frozenset({"GET", "HEAD"}),
		respect_retry_after_header=False,
	)
	adapter = HTTPAdapter(max_retries=retry, pool_connections=4, pool_maxsize=4)
	s.mount("https://", adapter)
	s.mount("http://", adapter)
	return s


def manifest_url_for(url: str) -> str:
	parts = urllib.parse.urlsplit(url)
	stem_path = parts.path.rsplit("/", 1)
	name = stem_path[-1]
	stem = name[: -len(".csv")] if name.endswith(".csv") else name
	new_path = (stem_path[0] + "/" if len(stem_path) == 2 else "") + stem + ".manifest.json"
	return urllib.parse.urlunsplit((parts.scheme, parts.netloc, new_path, parts.query, parts.fragment))


def cache_path_for(url: str, cache_dir: Path) -> Path:
	"""Stable local path: ``<cache>/<sha256(url)[:16]>/<basename>.csv``."""

	digest = hashlib.sha256(url.encode("utf-8")).hexdigest()[:16]
	name = Path(urllib.parse.urlsplit(url).path).name or "dataset.csv"
	if not name.endswith(".csv"):
		name += ".csv"
	return Path(cache_dir) / digest / name


def download_file(session: requests.Session, url: str, dest: Path, *, sleep=time.sleep) -> None:
	"""Download ``url`` to ``dest`` via a ``.part`` file and atomic replace; raises DatasetError."""

	dest.parent.mkdir(parents=True, exist_ok=True)
	tmp = dest.with_name(dest.name + ".part")
	last_err: BaseException | None = None
	for attempt in range(MAX_ATTEMPTS):
		try:
			r = session.get(url, headers={"User-Agent": USER_AGENT}, timeout=(4.0, 30.0))
			r.raise_for_status()
			data = r.content
			if not data:
				last_err = ValueError("empty response body")
			else:
				tmp.write_bytes(data)
				tmp.replace(dest)
				return
		except Exception as e:
			last_err = e
			logger.debug("Download failed for %s (attempt %s/%s): %s", url, attempt + 1, MAX_ATTEMPTS, e)
		if attempt < MAX_ATTEMPTS - 1:
			sleep(min(6.0, 0.4 * (2**attempt)))
	try:
		tmp.unlink(missing_ok=True)
	except OSError:
		pass
	raise DatasetError(f"could not download {url}: {last_err}")


def fetch_dataset(url: str, cache_dir: Path, *, session: Optional[requests.Session] = None, refresh: bool = False) -> Path:
	"""Return the local path of the cached CSV, downloading it and its manifest when needed."""

	dest = cache_path_for(url, cache_dir)
	side = manifest_path_for(dest)
	if not refresh and dest.is_file() and dest.stat().st_size > 0 and side.is_file():
		logger.debug("Dataset cache hit for %s", url)
		return dest
	session = session or make_http_session()
	logger.info("Fetching dataset %s", url)
	download_file(session, url, dest)
	download_file(session, manifest_url_for(url), side)
	return dest
