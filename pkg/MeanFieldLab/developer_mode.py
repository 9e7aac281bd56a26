"""Developer mode: DEBUG logging for the experiment subsystems and numpy floating-point tracing.

Enabled by ``--dev``, the config's ``developer_mode`` flag or ``MEANFIELDLAB_DEV``. While on,
numpy overflow / invalid / divide events are routed to the ``MeanFieldLab.numerics`` logger
instead of numpy's default warnings, so a diverging flow leaves a trail in the run log.
"""

from __future__ import annotations

import logging
import os
from typing import Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)
numerics_logger = logging.getLogger("MeanFieldLab.numerics")

_DEV_LOGGER_NAMES = (
	"MeanFieldLab",
	"MeanFieldLab.core",
	"MeanFieldLab.measure",
	"MeanFieldLab.models",
	"MeanFieldLab.flow",
	"MeanFieldLab.escape",
	"MeanFieldLab.asymptotics",
	"MeanFieldLab.cli",
	"MeanFieldLab.numerics",
)
_TRACED = ("over", "invalid", "divide")

# numpy error state saved when tracing starts; None while tracing is off
_saved_state: Optional[Dict[str, object]] = None


def _numpy_error_callback(kind: str, flag: int) -> None:
	numerics_logger.debug("numpy floating-point event: %s (flag %d)", kind, flag)


def is_developer_mode(config: object | None) -> bool:
	"""True when config flag or ``MEANFIELDLAB_DEV`` env enables developer mode."""

	if _env_developer_mode():
		return True
	if config is None:
		return False
	return bool(getattr(config, "developer_mode", False))


def _env_developer_mode() -> bool:
	env = (os.environ.get("MEANFIELDLAB_DEV") or "").strip().lower()
	return env in ("1", "true", "yes", "on")


def developer_mode_status_text(config: object | None) -> str:
	tracing = "on" if numpy_tracing_active() else "off"
	if _env_developer_mode():
		return f"Developer mode: active (MEANFIELDLAB_DEV) | Logging: DEBUG | numpy tracing: {tracing}"
	if is_developer_mode(config):
		return f"Developer mode: active (config) | Logging: DEBUG | numpy tracing: {tracing}"
	return "Developer mode: off | Logging: normal"


def numpy_tracing_active() -> bool:
	return _saved_state is not None


def _enable_numpy_tracing() -> None:
	global _saved_state
	if _saved_state is not None:
		return
	_saved_state = {"err": np.geterr(), "call": np.geterrcall()}
	np.seterrcall(_numpy_error_callback)
	np.seterr(**{k: "call" for k in _TRACED})


def _disable_numpy_tracing() -> None:
	global _saved_state
	if _saved_state is None:
		return
	np.seterr(**_saved_state["err"])
	np.seterrcall(_saved_state["call"])
	_saved_state = None


def apply_log_verbosity(*, enabled: bool) -> None:
	"""Raise or lower log verbosity for the experiment subsystems and toggle numpy tracing."""

	level = logging.DEBUG if enabled else logging.WARNING
	for name in _DEV_LOGGER_NAMES:
		logging.getLogger(name).setLevel(level)
	if enabled:
		_enable_numpy_tracing()
		logger.debug("Developer mode logging enabled (DEBUG for %s)", ", ".join(_DEV_LOGGER_NAMES))
	else:
		_disable_numpy_tracing()
		logger.info("Developer mode logging disabled")
