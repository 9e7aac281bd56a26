"""Descriptor <-> object mapping for model families, used by configs and manifests."""

from __future__ import annotations

from typing import Any, Callable, Dict, Mapping

from ..core import ConfigError, DimensionMismatch
from .attention import AttentionHead
from .base import ModelSpec
from .dataset import Dataset
from .sigmoid_net import SigmoidNet

FAMILIES = ("sigmoid", "attention")


def _sigmoid(desc: Mapping[str, Any]) -> ModelSpec:
	return SigmoidNet(int(desc["d_in"]), int(desc["d_out"]), str(desc.get("activation", "sigmoid")))


def _attention(desc: Mapping[str, Any]) -> ModelSpec:
	k = desc.get("k")
	return AttentionHead(int(desc["d"]), int(desc["n"]), None if k is None else int(k))


_BUILDERS: Dict[str, Callable[[Mapping[str, Any]], ModelSpec]] = {
	"sigmoid": _sigmoid,
	"attention": _attention,
}


def model_from_descriptor(desc: Mapping[str, Any]) -> ModelSpec:
	family = desc.get("family")
	builder = _BUILDERS.get(str(family))
	if builder is None:
		raise ConfigError(f"Unknown model family {family!r} (expected one of: {', '.join(FAMILIES)})")
	try:
		return builder(desc)
	except KeyError as exc:
		raise ConfigError(f"model descriptor for {family!r} is missing {exc.args[0]!r}") from None


def build_model(section: Mapping[str, Any], data: Dataset) -> ModelSpec:
	"""Model for the ``model`` config section, with dimensions taken from the dataset."""

	family = section.get("family", "sigmoid")
	if family == "sigmoid":
		return SigmoidNet(data.d_in, data.d_out, str(section.get("activation", "sigmoid")))
	if family == "attention":
		if data.n_tokens is None:
			raise DimensionMismatch("attention dataset n_tokens", "a token count", None)
		return AttentionHead(data.d_in // data.n_tokens, data.n_tokens, data.d_out)
	raise ConfigError(f"Unknown model family {family!r} (expected one of: {', '.join(FAMILIES)})")
