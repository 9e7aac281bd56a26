"""Entry point for MeanFieldLab.

``run_app`` parses the command line and returns the process exit code; the
``MeanFieldLab.py`` launcher and ``python -m MeanFieldLab.main`` both go through it.
"""

from __future__ import annotations

from typing import List, Optional

from .cli import main as _cli_main


def run_app(argv: Optional[List[str]] = None) -> int:
	return _cli_main(argv)


if __name__ == "__main__":
	raise SystemExit(run_app())
