"""Launcher wrapper for MeanFieldLab.

Run ``python MeanFieldLab.py run MeanFieldLab/templates/simulate.jsonc`` from the
repository root; the exit code is the experiment's (see ``MeanFieldLab/core.py``).
"""

import sys
import traceback

if __name__ == "__main__":
	try:
		from MeanFieldLab.main import run_app

		raise SystemExit(run_app())
	except Exception:
		traceback.print_exc()
		sys.exit(1)
