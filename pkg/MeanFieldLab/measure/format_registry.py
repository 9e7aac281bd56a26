"""On-disk ensemble ``format`` version and the binary header that carries it.

Binary ensemble files carry ``format`` **1** in their header; CSV files carry
no version and are always read as the current layout.

Header layout (little-endian)::

	offset 0   4s  magic b"MFLE"
	offset 4   H   format version
	offset 6   H   dtype code (0 = float64)
	offset 8   I   m
	offset 12  H   d_w
	offset 14  H   d_theta
"""

from __future__ import annotations

import struct
from typing import Dict, NamedTuple

from .ensemble import InvalidEnsemble

CURRENT_ENSEMBLE_FORMAT: int = 1

FORMAT_NOTES: Dict[int, str] = {
	1: "16-byte header followed by m * (d_w + d_theta) float64 little-endian values, w before theta.",
}

MAGIC = b"MFLE"
HEADER = struct.Struct("<4sHHIHH")
DTYPE_FLOAT64 = 0
# numpy dtype and item size per header dtype code
DTYPES: Dict[int, tuple] = {DTYPE_FLOAT64: ("<f8", 8)}


class UnsupportedEnsembleFormat(ValueError):
	"""A binary ensemble declares a ``format`` other than :data:`CURRENT_ENSEMBLE_FORMAT`."""

	def __init__(self, found: int, path: str = "") -> None:
		self.found = found
		self.path = path
		msg = f"ensemble format {found} cannot be read (this build reads format {CURRENT_ENSEMBLE_FORMAT})"
		if path:
			msg = f"{msg}: {path}"
		super().__init__(msg)


class EnsembleHeader(NamedTuple):
	version: int
	dtype_code: int
	m: int
	d_w: int
	d_theta: int

	@property
	def payload_size(self) -> int:
		return self.m * (self.d_w + self.d_theta) * DTYPES[self.dtype_code][1]


def assert_format_supported(found: int, *, path: str = "") -> None:
	if found != CURRENT_ENSEMBLE_FORMAT:
		raise UnsupportedEnsembleFormat(found, path=path)


def pack_header(m: int, d_w: int, d_theta: int) -> bytes:
	return HEADER.pack(MAGIC, CURRENT_ENSEMBLE_FORMAT, DTYPE_FLOAT64, m, d_w, d_theta)


def parse_header(data: bytes, *, path: str = "") -> EnsembleHeader:
	"""Validate magic, ``format`` and dtype of a binary ensemble and return its header."""

	where = f" {path}" if path else ""
	if len(data) < HEADER.size:
		raise InvalidEnsemble(f"truncated ensemble header ({len(data)} bytes){where}")
	magic, version, dtype_code, m, d_w, d_theta = HEADER.unpack_from(data, 0)
	if magic != MAGIC:
		raise InvalidEnsemble(f"not an ensemble file (magic {magic!r}){where}")
	assert_format_supported(int(version), path=path)
	if dtype_code not in DTYPES:
		raise InvalidEnsemble(f"unsupported dtype code {dtype_code}{where}")
	return EnsembleHeader(int(version), int(dtype_code), int(m), int(d_w), int(d_theta))
