"""Reduced escape dynamics, scalar escape sets and vector stable sets."""

from .fields import (
	FIELD_NAMES,
	AsymptoticField,
	ArcField,
	CallableField,
	ConstantField,
	EnsembleField,
	FieldG,
	RadialAlignedField,
	RadialBumpField,
	SupNorms,
	TiltedSaturationField,
	ZeroField,
	field_from_descriptor,
	hessian_vector_field,
	sup_norms,
)
from .ode import EscapeTrajectory, escape_ode_run
from .perturbations import KINDS as PERTURBATION_KINDS
from .perturbations import Perturbation, make_perturbation
from .report import write_escape_report
from .scalar import (
	EscapeRateReport,
	EscapeSetScalar,
	NoEscapeSet,
	RegimeReport,
	build_escape_set_scalar,
	find_regular_value,
	regime_bookkeeping,
	sample_escape_set,
	verify_escape_rate,
)
from .vector import (
	CondCheckResult,
	LocalConstants,
	PreconditionError,
	StableSetVector,
	cond_refined_check,
	local_constants,
	local_maximizer,
	naive_construction_demo,
	sample_K,
	sample_stable_set,
	stable_set_from_check,
	stable_set_from_maximizer,
	verify_stable_set_vector,
)

__all__ = [
	"FIELD_NAMES",
	"AsymptoticField",
	"ArcField",
	"CallableField",
	"ConstantField",
	"CondCheckResult",
	"EnsembleField",
	"EscapeRateReport",
	"EscapeSetScalar",
	"EscapeTrajectory",
	"FieldG",
	"LocalConstants",
	"NoEscapeSet",
	"PERTURBATION_KINDS",
	"Perturbation",
	"PreconditionError",
	"RadialAlignedField",
	"RadialBumpField",
	"RegimeReport",
	"StableSetVector",
	"SupNorms",
	"TiltedSaturationField",
	"ZeroField",
	"build_escape_set_scalar",
	"cond_refined_check",
	"escape_ode_run",
	"find_regular_value",
	"field_from_descriptor",
	"hessian_vector_field",
	"local_constants",
	"local_maximizer",
	"make_perturbation",
	"naive_construction_demo",
	"regime_bookkeeping",
	"sample_K",
	"sample_escape_set",
	"sample_stable_set",
	"stable_set_from_check",
	"stable_set_from_maximizer",
	"sup_norms",
	"verify_escape_rate",
	"verify_stable_set_vector",
	"write_escape_report",
]
