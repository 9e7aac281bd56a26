"""Empirical datasets: CSV files with a sidecar manifest and seeded synthetic generators."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

import numpy as np

logger = logging.getLogger(__name__)

GENERATORS = ("teacher-network", "gaussian-mixture", "attention-contexts")


class DatasetError(ValueError):
	"""Unreadable, inconsistent or unknown dataset source."""


@dataclass(frozen=True, eq=False)
class Dataset:
	"""N input rows and N label rows; attention contexts are stored flattened (n_tokens * d)."""

	inputs: np.ndarray
	labels: np.ndarray
	n_tokens: Optional[int] = None

	def __post_init__(self) -> None:
		x = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64)).copy()
		y = np.atleast_2d(np.asarray(self.labels, dtype=np.float64)).copy()
		if x.ndim != 2 or y.ndim != 2:
			raise DatasetError("inputs and labels must be 2-D arrays")
		if x.shape[0] != y.shape[0]:
			raise DatasetError(f"inputs have {x.shape[0]} rows but labels have {y.shape[0]}")
		if x.shape[0] < 1:
			raise DatasetError("a dataset needs at least one sample")
		if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
			raise DatasetError("dataset contains non-finite values")
		if self.n_tokens is not None and (self.n_tokens < 1 or x.shape[1] % self.n_tokens):
			raise DatasetError(f"input width {x.shape[1]} is not a multiple of n_tokens={self.n_tokens}")
		x.setflags(write=False)
		y.setflags(write=False)
		object.__setattr__(self, "inputs", x)
		object.__setattr__(self, "labels", y)

	@property
	def N(self) -> int:
		return int(self.inputs.shape[0])

	@property
	def d_in(self) -> int:
		return int(self.inputs.shape[1])

	@property
	def d_out(self) -> int:
		return int(self.labels.shape[1])

	@property
	def token_dim(self) -> Optional[int]:
		return None if self.n_tokens is None else self.d_in // self.n_tokens

	def contexts(self) -> np.ndarray:
		if self.n_tokens is None:
			raise DatasetError("dataset has no token structure")
		return self.inputs.reshape(self.N, self.n_tokens, self.d_in // self.n_tokens)

	def subset(self, idx) -> "Dataset":
		return Dataset(self.inputs[idx], self.labels[idx], self.n_tokens)

	def describe(self) -> Dict[str, Any]:
		return {"N": self.N, "d_in": self.d_in, "d_out": self.d_out, "n_tokens": self.n_tokens}


def manifest_path_for(csv_path: Path) -> Path:
	csv_path = Path(csv_path)
	return csv_path.with_name(csv_path.stem + ".manifest.json")


def load_dataset_csv(path: Path) -> Dataset:
	"""Read ``features..., labels...`` rows; widths come from ``<stem>.manifest.json``."""

	path = Path(path)
	side = manifest_path_for(path)
	if not path.is_file():
		raise DatasetError(f"dataset file not found: {path}")
	if not side.is_file():
		raise DatasetError(f"missing sidecar manifest {side.name} for {path.name}")
	try:
		meta = json.loads(side.read_text(encoding="utf-8"))
		d_in, d_out = int(meta["d_in"]), int(meta["d_out"])
	except (OSError, ValueError, KeyError, TypeError) as exc:
		raise DatasetError(f"bad dataset manifest {side}: {exc}") from exc
	n_tokens = meta.get("n_tokens")
	skip = 1 if meta.get("header", False) else 0
	try:
		raw = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2, dtype=np.float64)
	except ValueError as exc:
		raise DatasetError(f"cannot parse {path}: {exc}") from exc
	if raw.shape[1] != d_in + d_out:
		raise DatasetError(f"{path.name} has {raw.shape[1]} columns, manifest declares {d_in} + {d_out}")
	logger.debug("Loaded %s rows from %s", raw.shape[0], path)
	return Dataset(raw[:, :d_in], raw[:, d_in:], None if n_tokens is None else int(n_tokens))


def save_dataset_csv(path: Path, data: Dataset) -> None:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	np.savetxt(path, np.hstack([data.inputs, data.labels]), delimiter=",", fmt="%.17g")
	meta = {"d_in": data.d_in, "d_out": data.d_out, "n_tokens": data.n_tokens, "header": False}
	manifest_path_for(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def gaussian_mixture(n_samples: int, d_in: int, n_classes: int, seed: int, spread: float = 3.0) -> Dataset:
	"""One Gaussian blob per class around random centers; one-hot labels."""

	rng = np.random.default_rng(seed)
	centers = spread * rng.standard_normal((n_classes, d_in))
	cls = rng.integers(0, n_classes, size=n_samples)
	x = centers[cls] + rng.standard_normal((n_samples, d_in))
	return Dataset(x, np.eye(n_classes)[cls])


def teacher_network(
	n_samples: int,
	d_in: int,
	d_out: int,
	seed: int,
	*,
	width: int = 8,
	noise: float = 0.0,
	activation: str = "sigmoid",
) -> Dataset:
	"""Gaussian inputs labelled by a random sigmoid network of the given width."""

	from .sigmoid_net import SigmoidNet

	rng = np.random.default_rng(seed)
	x = rng.standard_normal((n_samples, d_in))
	teacher = SigmoidNet(d_in, d_out, activation)
	W = rng.standard_normal((width, d_out))
	Theta = rng.standard_normal((width, d_in))
	y = teacher.mean_prediction(W, Theta, x)
	if noise > 0:
		y = y + noise * rng.standard_normal(y.shape)
	return Dataset(x, y)


def attention_contexts(
	n_samples: int,
	d: int,
	n_tokens: int,
	k: int,
	seed: int,
	*,
	noise: float = 0.0,
	token_scale: float = 1.0,
) -> Dataset:
	"""Gaussian token contexts labelled by a random single attention head."""

	from .attention import AttentionHead

	rng = np.random.default_rng(seed)
	x = token_scale * rng.standard_normal((n_samples, n_tokens * d))
	teacher = AttentionHead(d, n_tokens, k)
	W = rng.standard_normal((1, teacher.d_w))
	Theta = rng.standard_normal((1, teacher.d_theta))
	y = teacher.mean_prediction(W, Theta, x)
	if noise > 0:
		y = y + noise * rng.standard_normal(y.shape)
	return Dataset(x, y, n_tokens)


def dataset_from_config(section: Mapping[str, Any], seed: int, *, cache_dir: Optional[Path] = None) -> Dataset:
	"""Resolve the ``dataset`` config section: ``synthetic``, a local CSV path, or an http(s) URL."""

	source = str(section.get("source", "synthetic"))
	if source == "synthetic":
		gen = section.get("generator", "teacher-network")
		n = int(section.get("n_samples", 200))
		d_out = int(section.get("d_out", 1))
		noise = float(section.get("noise", 0.0))
		if gen == "teacher-network":
			return teacher_network(
				n,
				int(section.get("d_in", 2)),
				d_out,
				seed,
				width=int(section.get("width", 8)),
				noise=noise,
				activation=str(section.get("activation", "sigmoid")),
			)
		if gen == "gaussian-mixture":
			return gaussian_mixture(n, int(section.get("d_in", 2)), d_out, seed, float(section.get("spread", 3.0)))
		if gen == "attention-contexts":
			return attention_contexts(
				n,
				int(section.get("d", 2)),
				int(section.get("n_tokens", 3)),
				d_out,
				seed,
				noise=noise,
				token_scale=float(section.get("token_scale", 1.0)),
			)
		raise DatasetError(f"unknown dataset generator {gen!r} (expected one of: {', '.join(GENERATORS)})")
	if source.startswith(("http://", "https://")):
		from .remote import fetch_dataset

		return load_dataset_csv(fetch_dataset(source, cache_dir or Path(".cache") / "datasets"))
	return load_dataset_csv(Path(source))
