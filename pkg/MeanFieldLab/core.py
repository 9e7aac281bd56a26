"""Core plumbing for MeanFieldLab experiments.

Holds what every other module leans on: typed errors and their exit codes,
the ``log_and_reraise`` banner helper, JSONC parsing, seed derivation, atomic
JSON writes, and the experiment configuration layer (``ExperimentConfig`` plus
``ConfigManager``). Nothing here imports numerics beyond numpy's seed tools.
"""

from __future__ import annotations

import copy
import json
import logging
import os
import shutil
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

JsonDict = Dict[str, Any]

CONFIG_FORMAT_VERSION = 1

EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_VALIDATION = 2
EXIT_DIVERGENCE = 3
EXIT_VERDICT_FAIL = 4

EXPERIMENT_KINDS = (
	"simulate",
	"stability",
	"escape-scalar",
	"escape-vector",
	"hardmax-scan",
	"sigmoid-asymptotics",
	"attention-limit",
	"w2-selftest",
)

# Energy and particle-norm ceilings of the divergence guard.
DIVERGENCE_NORM = 1e8
DIVERGENCE_ENERGY = 1e12


def log_and_reraise(ctx: str, *, likely_cause: str | None = None) -> None:
	"""Emit a full traceback with context, optional root-cause hint; re-raises the active exception."""
	hint = f"\nLikely cause: {likely_cause}" if likely_cause else ""
	logger.error(
		"%s\n%s%s\n%s",
		"!" * 72,
		ctx,
		hint,
		"!" * 72,
		exc_info=True,
	)
	raise


class ConfigError(ValueError):
	"""Invalid or unreadable experiment configuration."""


class UnknownExperimentKind(ConfigError):
	def __init__(self, kind: object) -> None:
		self.kind = kind
		super().__init__(f"Unknown experiment kind {kind!r} (expected one of: {', '.join(EXPERIMENT_KINDS)})")


class DimensionMismatch(ValueError):
	"""Arrays or descriptors disagree on a declared dimension."""

	def __init__(self, what: str, expected: object, found: object) -> None:
		self.what = what
		self.expected = expected
		self.found = found
		super().__init__(f"{what}: expected {expected}, found {found}")


class ManifestError(ValueError):
	"""A run directory has no readable ``manifest.json``."""


@dataclass(eq=False)
class NumericalDivergence(RuntimeError):
	"""Raised when an integration leaves the finite, well-scaled regime.

	``last_finite`` holds whatever the integrator had recorded before the
	offending step (a partial trajectory or the last finite state), so callers
	can still persist it.
	"""

	step: int
	time: float
	reason: str
	last_finite: Any = None

	def __str__(self) -> str:
		return f"numerical divergence at step {self.step} (t={self.time:.6g}): {self.reason}"


def strip_jsonc(text: str) -> str:
	"""Drop ``//`` comment lines so the rest parses as plain JSON."""

	lines = []
	for line in text.splitlines():
		if line.lstrip().startswith("//"):
			continue
		lines.append(line)
	return "\n".join(lines)


def derive_seeds(seed: int, names: Sequence[str]) -> Dict[str, int]:
	"""Independent 63-bit sub-seeds, one per name, stable in the order given."""

	children = np.random.SeedSequence(int(seed)).spawn(len(names))
	return {name: int(child.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for name, child in zip(names, children)}


def write_json_atomic(path: Path, data: Any) -> None:
	"""Write ``data`` as indented JSON through a temp file + fsync + replace."""

	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	tmp_path = path.with_suffix(path.suffix + ".tmp")
	try:
		with open(tmp_path, "w", encoding="utf-8") as f:
			json.dump(data, f, indent=2, sort_keys=True, allow_nan=True)
			f.write("\n")
			f.flush()
			os.fsync(f.fileno())
		tmp_path.replace(path)
	except Exception:
		log_and_reraise(
			f"Cannot write {path}",
			likely_cause="Insufficient permissions, disk full, or read-only output directory.",
		)


def read_manifest(run_dir: Path) -> JsonDict:
	"""Load ``manifest.json`` from a run directory or raise :class:`ManifestError`."""

	path = Path(run_dir) / "manifest.json"
	if not path.is_file():
		raise ManifestError(f"No manifest.json in {run_dir}")
	try:
		data = json.loads(path.read_text(encoding="utf-8"))
	except (OSError, json.JSONDecodeError) as exc:
		raise ManifestError(f"Corrupt manifest {path}: {exc}") from exc
	if not isinstance(data, dict) or "kind" not in data:
		raise ManifestError(f"Manifest {path} has no experiment kind")
	return data


# Per-section defaults. Every resolved config carries all of them, so the
# manifest always shows the values a run actually used.
_SECTION_DEFAULTS: JsonDict = {
	"model": {"family": "sigmoid", "activation": "sigmoid"},
	"loss": {"kind": "square"},
	"dataset": {
		"source": "synthetic",
		"generator": "teacher-network",
		"n_samples": 200,
		"d_in": 5,
		"d_out": 2,
		"width": 8,
		"noise": 0.0,
	},
	"init": {"kind": "gaussian", "scale": 1.0, "m": 256, "location": None},
	"flow": {
		"integrator": "rk4",
		"step_size": 0.05,
		"t_end": 5.0,
		"record_every": 10,
		"truncation": None,
		"max_halvings": 20,
	},
}

_PARAM_DEFAULTS: Dict[str, JsonDict] = {
	"simulate": {"energy_ratio_target": None},
	"stability": {"m_small": 64, "m_large": 512, "n_projections": 256},
	"escape-scalar": {
		"field": {"name": "radial-bump", "d_theta": 2, "amplitude": 1.0, "offset": 0.5},
		"eta_search": [1.0, 1.0],
		"trials": 100,
		"t_end": 10.0,
		"step_size": 0.01,
		"record_every": 1,
		"perturbations": ["constant-offset", "time-oscillating", "adversarial-toward-boundary"],
		"n_boundary": 1000,
		"theta_scale": 2.0,
	},
	"escape-vector": {
		"field": {"name": "radial-aligned", "d_theta": 2, "v": [1.0, 0.0]},
		"eta": 0.9,
		"eta_fraction": 0.9,
		"v": None,
		"naive_w_norms": None,
		"trials": 100,
		"t_end": 5.0,
		"step_size": 0.01,
		"record_every": 1,
		"perturbations": ["constant-offset", "time-oscillating", "adversarial-toward-boundary"],
		"n_samples": 1000,
		"theta_scale": 2.0,
		"maximizer_start": None,
	},
	"hardmax-scan": {
		"d": 2,
		"n": 3,
		"n_contexts": 10000,
		"directions": 512,
		"sphere_kind": "stratified-plus-axes",
		"r_grid": [1.0, 10.0, 100.0, 1000.0],
		"tie_tol": 1e-9,
		"rate_r_min": 10.0,
		"rate_tolerance": 0.15,
		"target_gap": 1e-2,
		"gap_threshold": None,
	},
	"sigmoid-asymptotics": {
		"d_in": 3,
		"density": {"kind": "gaussian", "scale": 1.0},
		"f": "tanh-first",
		"n_samples": 1000000,
		"n_surface": 200000,
		"r_grid": [0.0, 1.0, 10.0, 100.0, 1000.0],
		"theta": None,
	},
	"attention-limit": {
		"d": 2,
		"n": 2,
		"A": [[1.0, 0.0], [0.0, 1.0]],
		"f": "tanh-first-token",
		"n_samples": 200000,
		"r_grid": [10.0, 30.0, 100.0, 300.0, 1000.0],
		"alpha_floor": 1e-6,
		"token_scale": 1.0,
	},
	"w2-selftest": {"instances": 200, "max_m": 6, "dimension": 3},
}


def _merge_defaults(defaults: Mapping[str, Any], given: Mapping[str, Any] | None) -> JsonDict:
	out = copy.deepcopy(dict(defaults))
	for key, value in (given or {}).items():
		if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
			out[key] = _merge_defaults(out[key], value)
		else:
			out[key] = copy.deepcopy(value)
	return out


@dataclass
class ExperimentConfig:
	"""Fully resolved experiment description; every default is materialized."""

	kind: str
	seed: int = 0
	output: str = "runs/latest"
	model: JsonDict = field(default_factory=dict)
	loss: JsonDict = field(default_factory=dict)
	dataset: JsonDict = field(default_factory=dict)
	init: JsonDict = field(default_factory=dict)
	flow: JsonDict = field(default_factory=dict)
	params: JsonDict = field(default_factory=dict)
	developer_mode: bool = False

	@classmethod
	def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
		if not isinstance(data, Mapping):
			raise ConfigError(f"Config root must be an object, got {type(data).__name__}")
		kind = data.get("kind")
		if kind not in EXPERIMENT_KINDS:
			raise UnknownExperimentKind(kind)
		fmt = data.get("config_format_version", CONFIG_FORMAT_VERSION)
		if fmt != CONFIG_FORMAT_VERSION:
			raise ConfigError(f"Unsupported config_format_version {fmt!r} (only {CONFIG_FORMAT_VERSION} is supported)")
		seed = data.get("seed", 0)
		if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
			raise ConfigError(f"seed must be a non-negative integer, got {seed!r}")
		known = {"kind", "seed", "output", "config_format_version", "developer_mode", "params", *_SECTION_DEFAULTS}
		unknown = sorted(set(data) - known)
		if unknown:
			raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")
		sections = {}
		for name, defaults in _SECTION_DEFAULTS.items():
			given = data.get(name)
			if given is not None and not isinstance(given, Mapping):
				raise ConfigError(f"Section {name!r} must be an object")
			sections[name] = _merge_defaults(defaults, given)
		params = data.get("params")
		if params is not None and not isinstance(params, Mapping):
			raise ConfigError("Section 'params' must be an object")
		cfg = cls(
			kind=str(kind),
			seed=int(seed),
			output=str(data.get("output", "runs/latest")),
			params=_merge_defaults(_PARAM_DEFAULTS[str(kind)], params),
			developer_mode=bool(data.get("developer_mode", False)),
			**sections,
		)
		cfg.validate()
		return cfg

	def to_dict(self) -> JsonDict:
		return {
			"config_format_version": CONFIG_FORMAT_VERSION,
			"kind": self.kind,
			"seed": self.seed,
			"output": self.output,
			"developer_mode": self.developer_mode,
			"model": copy.deepcopy(self.model),
			"loss": copy.deepcopy(self.loss),
			"dataset": copy.deepcopy(self.dataset),
			"init": copy.deepcopy(self.init),
			"flow": copy.deepcopy(self.flow),
			"params": copy.deepcopy(self.params),
		}

	def validate(self) -> None:
		"""Cheap structural checks; numeric ranges are enforced by the owning modules."""

		fl = self.flow
		if fl.get("integrator") not in ("euler", "rk4"):
			raise ConfigError(f"flow.integrator must be 'euler' or 'rk4', got {fl.get('integrator')!r}")
		for key in ("step_size", "t_end"):
			value = fl.get(key)
			if not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
				raise ConfigError(f"flow.{key} must be a positive number, got {value!r}")
		rec = fl.get("record_every")
		if not isinstance(rec, int) or isinstance(rec, bool) or rec < 1:
			raise ConfigError(f"flow.record_every must be a positive integer, got {rec!r}")
		m = self.init.get("m")
		if not isinstance(m, int) or isinstance(m, bool) or m < 1:
			raise ConfigError(f"init.m must be a positive integer, got {m!r}")
		if self.loss.get("kind") not in ("square", "cross-entropy"):
			raise ConfigError(f"loss.kind must be 'square' or 'cross-entropy', got {self.loss.get('kind')!r}")
		if self.kind == "simulate":
			target = self.params.get("energy_ratio_target")
			if target is not None and (not isinstance(target, (int, float)) or isinstance(target, bool) or target <= 0):
				raise ConfigError(f"params.energy_ratio_target must be a positive number or null, got {target!r}")
		if self.kind == "stability":
			small, large = self.params.get("m_small"), self.params.get("m_large")
			if not all(isinstance(v, int) and v >= 1 for v in (small, large)) or large % small:
				raise ConfigError(f"stability needs m_small dividing m_large, got {small!r} and {large!r}")

	def with_overrides(self, *, seed: Optional[int] = None, output: Optional[str] = None) -> "ExperimentConfig":
		data = self.to_dict()
		if seed is not None:
			data["seed"] = int(seed)
		if output is not None:
			data["output"] = str(output)
		return ExperimentConfig.from_dict(data)


class ConfigManager:
	"""Load and save an experiment config file (JSON with ``//`` comment lines)."""

	def __init__(self, config_path: Path) -> None:
		self.config_path = Path(config_path)
		self.config_format_version: int = CONFIG_FORMAT_VERSION
		self.last_updated: str | None = None

	def load(self) -> ExperimentConfig:
		if not self.config_path.is_file():
			raise ConfigError(f"Config file not found: {self.config_path}")
		try:
			raw = self.config_path.read_text(encoding="utf-8")
			data = json.loads(strip_jsonc(raw))
		except json.JSONDecodeError as exc:
			bad_file = self.config_path.with_name(self.config_path.name + ".corrupted")
			shutil.move(str(self.config_path), str(bad_file))
			try:
				raise ConfigError(f"{self.config_path.name} is invalid JSON (moved aside to {bad_file.name})") from exc
			except ConfigError:
				log_and_reraise(
					f"{self.config_path.name} is invalid JSON (moved aside to {bad_file.name}).",
					likely_cause="Broken JSON from hand edits or a truncated write.",
				)
		if isinstance(data, dict):
			self.config_format_version = int(data.get("config_format_version", CONFIG_FORMAT_VERSION))
			lu = data.get("last_updated")
			self.last_updated = lu if isinstance(lu, str) else None
			data = {k: v for k, v in data.items() if k != "last_updated"}
		return ExperimentConfig.from_dict(data)

	def save(self, cfg: ExperimentConfig) -> None:
		data = cfg.to_dict()
		data["last_updated"] = datetime.now().isoformat()
		write_json_atomic(self.config_path, data)
		self.last_updated = data["last_updated"]


def describe_artifacts(run_dir: Path) -> List[str]:
	"""Sorted relative paths of every file under ``run_dir`` except the manifest."""

	root = Path(run_dir)
	if not root.is_dir():
		return []
	return sorted(
		p.relative_to(root).as_posix() for p in root.rglob("*") if p.is_file() and p.name != "manifest.json"
	)
