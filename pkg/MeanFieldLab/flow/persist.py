"""Trajectory directories: ``manifest.json``, ``states/state_XXXXX.mfe`` snapshots and ``scalars.csv``."""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Any, Dict, Tuple

from ..core import JsonDict, ManifestError, log_and_reraise, read_manifest, write_json_atomic
from ..measure import read_ensemble_binary, write_ensemble_binary
from .integrate import Trajectory

logger = logging.getLogger(__name__)

SCALAR_COLUMNS = ("t", "energy", "grad_norm", "psi2_norm", "second_moment", "dissipation")
STATE_DIR = "states"


def state_name(index: int) -> str:
	return f"state_{index:05d}.mfe"


def save_trajectory(run_dir: Path, traj: Trajectory, manifest: Dict[str, Any]) -> None:
	"""Write states, scalars and the manifest; the manifest is written last."""

	run_dir = Path(run_dir)
	states = run_dir / STATE_DIR
	try:
		states.mkdir(parents=True, exist_ok=True)
		for i, ens in enumerate(traj.states):
			write_ensemble_binary(states / state_name(i), ens)
		diss = traj.dissipation if len(traj.dissipation) == len(traj) else [math.nan] * len(traj)
		with open(run_dir / "scalars.csv", "w", newline="", encoding="utf-8") as f:
			writer = csv.writer(f)
			writer.writerow(SCALAR_COLUMNS)
			for row in zip(traj.times, traj.energies, traj.grad_norms, traj.psi2, traj.second_moments, diss):
				writer.writerow([repr(float(v)) for v in row])
	except OSError:
		log_and_reraise(f"Cannot write trajectory to {run_dir}", likely_cause="Output directory not writable or disk full.")
	data = dict(manifest)
	data["trajectory"] = {
		"n_states": len(traj),
		"status": traj.status,
		"halvings": traj.halvings,
		"scalar_columns": list(SCALAR_COLUMNS),
	}
	write_json_atomic(run_dir / "manifest.json", data)
	logger.info("Saved %s states to %s", len(traj), run_dir)


def load_trajectory(run_dir: Path) -> Tuple[Trajectory, JsonDict]:
	run_dir = Path(run_dir)
	manifest = read_manifest(run_dir)
	info = manifest.get("trajectory")
	if not isinstance(info, dict):
		raise ManifestError(f"{run_dir} has no trajectory section in its manifest")
	traj = Trajectory(halvings=int(info.get("halvings", 0)), status=str(info.get("status", "completed")))
	with open(run_dir / "scalars.csv", newline="", encoding="utf-8") as f:
		rows = list(csv.DictReader(f))
	if len(rows) != int(info["n_states"]):
		raise ManifestError(f"scalars.csv has {len(rows)} rows, manifest declares {info['n_states']}")
	for i, row in enumerate(rows):
		traj.times.append(float(row["t"]))
		traj.states.append(read_ensemble_binary(run_dir / STATE_DIR / state_name(i)))
		traj.energies.append(float(row["energy"]))
		traj.grad_norms.append(float(row["grad_norm"]))
		traj.psi2.append(float(row["psi2_norm"]))
		traj.second_moments.append(float(row["second_moment"]))
		if row.get("dissipation") not in (None, ""):
			traj.dissipation.append(float(row["dissipation"]))
	return traj, manifest
