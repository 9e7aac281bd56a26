"""Ensemble serialization: columnar CSV and a compact binary layout.

The binary header is owned by :mod:`.format_registry`; the payload after it is
m rows of (w, theta) as little-endian float64.
"""

from __future__ import annotations

import io
import logging
from pathlib import Path

import numpy as np

from .ensemble import Ensemble, InvalidEnsemble
from .format_registry import DTYPES, HEADER, pack_header, parse_header

logger = logging.getLogger(__name__)


def csv_header(d_w: int, d_theta: int) -> str:
	cols = [f"w_{i}" for i in range(d_w)] + [f"theta_{j}" for j in range(d_theta)]
	return ",".join(cols)


def ensemble_to_bytes(ens: Ensemble) -> bytes:
	head = pack_header(ens.m, ens.d_w, ens.d_theta)
	body = np.ascontiguousarray(ens.stacked(), dtype="<f8").tobytes()
	return head + body


def ensemble_from_bytes(data: bytes, *, path: str = "") -> Ensemble:
	head = parse_header(data, path=path)
	if len(data) - HEADER.size != head.payload_size:
		raise InvalidEnsemble(
			f"payload has {len(data) - HEADER.size} bytes, expected {head.payload_size} {path}".strip()
		)
	dtype = DTYPES[head.dtype_code][0]
	u = np.frombuffer(data, dtype=dtype, offset=HEADER.size).reshape(head.m, head.d_w + head.d_theta)
	return Ensemble.from_stacked(u.astype(np.float64), head.d_w)


def write_ensemble_binary(path: Path, ens: Ensemble) -> None:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	tmp = path.with_name(path.name + ".part")
	tmp.write_bytes(ensemble_to_bytes(ens))
	tmp.replace(path)


def read_ensemble_binary(path: Path) -> Ensemble:
	path = Path(path)
	return ensemble_from_bytes(path.read_bytes(), path=str(path))


def ensemble_to_csv(ens: Ensemble) -> str:
	buf = io.StringIO()
	np.savetxt(buf, ens.stacked(), delimiter=",", fmt="%.17g", header=csv_header(ens.d_w, ens.d_theta), comments="")
	return buf.getvalue()


def ensemble_from_csv(text: str, *, path: str = "") -> Ensemble:
	lines = text.splitlines()
	if not lines:
		raise InvalidEnsemble(f"empty ensemble CSV {path}".strip())
	cols = [c.strip() for c in lines[0].split(",")]
	d_w = sum(1 for c in cols if c.startswith("w_"))
	d_theta = sum(1 for c in cols if c.startswith("theta_"))
	if d_w + d_theta != len(cols) or cols != csv_header(d_w, d_theta).split(","):
		raise InvalidEnsemble(f"unexpected CSV header {lines[0]!r} {path}".strip())
	u = np.loadtxt(io.StringIO("\n".join(lines[1:])), delimiter=",", ndmin=2, dtype=np.float64)
	if u.shape[1] != len(cols):
		raise InvalidEnsemble(f"CSV rows have {u.shape[1]} columns, header declares {len(cols)} {path}".strip())
	return Ensemble.from_stacked(u, d_w)


def write_ensemble_csv(path: Path, ens: Ensemble) -> None:
	path = Path(path)
	path.parent.mkdir(parents=True, exist_ok=True)
	path.write_text(ensemble_to_csv(ens), encoding="utf-8")


def read_ensemble_csv(path: Path) -> Ensemble:
	path = Path(path)
	return ensemble_from_csv(path.read_text(encoding="utf-8"), path=str(path))
