"""Output writers for asymptotic scans: CSV tables, JSON summaries and gnuplot ``.dat`` columns."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..core import log_and_reraise
from .hardmax_scan import ConvergenceScan

logger = logging.getLogger(__name__)

SCAN_COLUMNS = ("r", "direction_id", "gap", "stderr")


def write_rows_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
	path = Path(path)
	try:
		path.parent.mkdir(parents=True, exist_ok=True)
		with open(path, "w", newline="", encoding="utf-8") as f:
			writer = csv.writer(f)
			writer.writerow(header)
			for row in rows:
				writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
	except OSError:
		log_and_reraise(f"Cannot write {path}", likely_cause="Output directory not writable or disk full.")


def write_scan_csv(path: Path, scan: ConvergenceScan) -> None:
	write_rows_csv(path, SCAN_COLUMNS, scan.rows())


def write_gnuplot_dat(path: Path, columns: Mapping[str, Sequence[float]], *, title: str = "") -> None:
	"""Whitespace-separated columns with a ``#`` header line, one row per index."""

	names = list(columns)
	data = np.column_stack([np.asarray(columns[name], dtype=np.float64) for name in names]) if names else np.empty((0, 0))
	path = Path(path)
	try:
		path.parent.mkdir(parents=True, exist_ok=True)
		with open(path, "w", encoding="utf-8") as f:
			if title:
				f.write(f"# {title}\n")
			f.write("# " + " ".join(names) + "\n")
			for row in data:
				f.write(" ".join(f"{v:.17g}" for v in row) + "\n")
	except OSError:
		log_and_reraise(f"Cannot write {path}", likely_cause="Output directory not writable or disk full.")
	logger.debug("Wrote %d rows to %s", data.shape[0], path)


def scan_plot_columns(scan: ConvergenceScan) -> dict:
	return {"r": scan.r_grid, "sup_gap": scan.sup_gaps, "sup_stderr": scan.sup_stderr}
