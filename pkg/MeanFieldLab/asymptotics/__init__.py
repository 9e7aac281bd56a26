"""Large-parameter limits: softmax to hardmax, sigmoid half-spaces and hyperplanes, attention gradients."""

from .attention_limit import (
	CONTEXT_FUNCTIONS,
	LABEL as CONJECTURE_LABEL,
	AttentionLimitReport,
	attention_gradient_limit_explore,
	context_function,
)
from .densities import (
	CustomDensity,
	Density,
	GaussianDensity,
	StudentDensity,
	UndeclaredDecay,
	density_from_config,
	require_decay,
)
from .emit import scan_plot_columns, write_gnuplot_dat, write_rows_csv, write_scan_csv
from .hardmax_scan import (
	RATE_R_MIN,
	RATE_TOLERANCE,
	ConvergenceScan,
	RateCheck,
	check_r_grid,
	direction_gaps,
	hardmax_convergence_scan,
	rate_check,
	tie_band_rate,
)
from .sigmoid_limits import (
	SCALAR_FUNCTIONS,
	LimitRow,
	LimitTable,
	halfspace_asymptote,
	scalar_function,
	sigmoid_gradient_limit_check,
	sigmoid_halfspace_check,
)
from .sphere import SPHERE_KINDS, SphereSampler

__all__ = [
	"AttentionLimitReport",
	"CONJECTURE_LABEL",
	"CONTEXT_FUNCTIONS",
	"ConvergenceScan",
	"CustomDensity",
	"Density",
	"GaussianDensity",
	"LimitRow",
	"LimitTable",
	"RATE_R_MIN",
	"RATE_TOLERANCE",
	"RateCheck",
	"SCALAR_FUNCTIONS",
	"SPHERE_KINDS",
	"SphereSampler",
	"StudentDensity",
	"UndeclaredDecay",
	"attention_gradient_limit_explore",
	"check_r_grid",
	"context_function",
	"density_from_config",
	"direction_gaps",
	"halfspace_asymptote",
	"hardmax_convergence_scan",
	"rate_check",
	"require_decay",
	"scalar_function",
	"scan_plot_columns",
	"sigmoid_gradient_limit_check",
	"sigmoid_halfspace_check",
	"tie_band_rate",
	"write_gnuplot_dat",
	"write_rows_csv",
	"write_scan_csv",
]
