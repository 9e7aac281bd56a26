"""Particle gradient flow of the empirical risk, its stability experiment and persistence."""

from .field import energy, first_variation, g_mu, global_minimizer_probe, residual_arrays, velocity, velocity_arrays
from .integrate import FlowConfig, Trajectory, run_flow
from .persist import load_trajectory, save_trajectory
from .stability import StabilityResult, fit_growth_rate, independent_pair_distances, stability_experiment

__all__ = [
	"FlowConfig",
	"StabilityResult",
	"Trajectory",
	"energy",
	"first_variation",
	"fit_growth_rate",
	"g_mu",
	"global_minimizer_probe",
	"independent_pair_distances",
	"load_trajectory",
	"residual_arrays",
	"run_flow",
	"save_trajectory",
	"stability_experiment",
	"velocity",
	"velocity_arrays",
]
