"""Escape reports: ``escape_report.json`` plus one CSV per trial under ``trajectories/``."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List

from ..core import log_and_reraise, write_json_atomic
from .ode import EscapeTrajectory

logger = logging.getLogger(__name__)

REPORT_NAME = "escape_report.json"
TRAJECTORY_DIR = "trajectories"


def trajectory_name(index: int) -> str:
	return f"trial_{index:04d}.csv"


def write_trajectory_csv(path: Path, traj: EscapeTrajectory) -> None:
	with open(path, "w", newline="", encoding="utf-8") as f:
		writer = csv.writer(f)
		writer.writerow(traj.header())
		for row in traj.rows():
			writer.writerow([repr(v) for v in row])


def write_escape_report(
	run_dir: Path,
	report: Dict[str, Any],
	trajectories: Iterable[EscapeTrajectory] = (),
	*,
	max_trajectories: int = 100,
) -> List[str]:
	"""Write the JSON report and up to ``max_trajectories`` trial CSVs; returns written names."""

	run_dir = Path(run_dir)
	written: List[str] = []
	tdir = run_dir / TRAJECTORY_DIR
	try:
		for i, traj in enumerate(trajectories):
			if i >= max_trajectories:
				break
			tdir.mkdir(parents=True, exist_ok=True)
			write_trajectory_csv(tdir / trajectory_name(i), traj)
			written.append(f"{TRAJECTORY_DIR}/{trajectory_name(i)}")
	except OSError:
		log_and_reraise(f"Cannot write escape trajectories to {tdir}", likely_cause="Output directory not writable or disk full.")
	write_json_atomic(run_dir / REPORT_NAME, report)
	written.insert(0, REPORT_NAME)
	logger.info("Escape report written to %s (%d trajectories)", run_dir, len(written) - 1)
	return written
