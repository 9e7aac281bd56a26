"""Command-line front end: ``run <config>``, ``report <run-dir>`` and ``selftest``.

Every run writes its outputs plus a ``manifest.json`` holding the resolved
config, the derived seeds, model/dataset descriptors, a verdict, a summary and
the file inventory. Only ``written_at`` changes between identical re-runs.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import requests

from . import __version__
from .asymptotics import (
	CONJECTURE_LABEL,
	SphereSampler,
	attention_gradient_limit_explore,
	context_function,
	density_from_config,
	hardmax_convergence_scan,
	rate_check,
	scalar_function,
	scan_plot_columns,
	sigmoid_gradient_limit_check,
	sigmoid_halfspace_check,
	write_gnuplot_dat,
	write_rows_csv,
	write_scan_csv,
)
from .core import (
	EXIT_DIVERGENCE,
	EXIT_OK,
	EXIT_RUNTIME_ERROR,
	EXIT_VALIDATION,
	EXIT_VERDICT_FAIL,
	ConfigError,
	ConfigManager,
	ExperimentConfig,
	JsonDict,
	ManifestError,
	NumericalDivergence,
	derive_seeds,
	describe_artifacts,
	read_manifest,
	write_json_atomic,
)
from .developer_mode import apply_log_verbosity, developer_mode_status_text, is_developer_mode
from .escape import (
	EnsembleField,
	FieldG,
	NoEscapeSet,
	build_escape_set_scalar,
	cond_refined_check,
	field_from_descriptor,
	make_perturbation,
	naive_construction_demo,
	regime_bookkeeping,
	sample_escape_set,
	sample_stable_set,
	stable_set_from_check,
	stable_set_from_maximizer,
	verify_escape_rate,
	verify_stable_set_vector,
	write_escape_report,
)
from .flow import FlowConfig, run_flow, save_trajectory, stability_experiment
from .flow.integrate import ENERGY_SLACK
from .losses import LossSpec
from .measure import InitSpec, sample_ensemble
from .models import Dataset, ModelSpec, build_model, dataset_from_config
from .selftest import run_selftest, w2_oracle_suite
from .workers import set_thread_cap

logger = logging.getLogger(__name__)

SEED_NAMES = ("init", "dataset", "projections", "sampler", "perturbations")
SPARK_CHARS = "▁▂▃▄▅▆▇█"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

# Verdicts that count as success for the exit code.
_OK_VERDICTS = ("OK", "PASS", "EXPLORATORY")


@dataclass
class RunOutcome:
	verdict: str
	summary: JsonDict = field(default_factory=dict)
	descriptors: JsonDict = field(default_factory=dict)
	manifest_extra: JsonDict = field(default_factory=dict)

	@property
	def exit_code(self) -> int:
		return EXIT_OK if self.verdict in _OK_VERDICTS else EXIT_VERDICT_FAIL


@dataclass
class Problem:
	data: Dataset
	model: ModelSpec
	loss: LossSpec
	init: InitSpec
	flow: FlowConfig

	def descriptors(self) -> JsonDict:
		return {
			"model": self.model.descriptor(),
			"dataset": self.data.describe(),
			"loss": self.loss.descriptor(),
			"init": self.init.to_dict(),
			"flow": self.flow.to_dict(),
		}


def build_problem(cfg: ExperimentConfig, seeds: Dict[str, int]) -> Problem:
	data = dataset_from_config(cfg.dataset, seeds["dataset"])
	model = build_model(cfg.model, data)
	loss = LossSpec.from_descriptor(cfg.loss, data.d_out)
	init = InitSpec.from_dict({**cfg.init, "d_w": model.d_w, "d_theta": model.d_theta, "seed": seeds["init"]})
	return Problem(data, model, loss, init, FlowConfig.from_dict(cfg.flow))


def _plain(value: Any) -> Any:
	if isinstance(value, dict):
		return {k: _plain(v) for k, v in value.items()}
	if isinstance(value, np.ndarray):
		return value.tolist()
	if isinstance(value, (tuple, list)):
		return [_plain(v) for v in value]
	if isinstance(value, np.generic):
		return value.item()
	return value


# --- experiment runners -----------------------------------------------------


def _run_simulate(cfg: ExperimentConfig, run_dir: Path, seeds: Dict[str, int]) -> RunOutcome:
	prob = build_problem(cfg, seeds)
	ens0 = sample_ensemble(prob.init, int(cfg.init["m"]))
	try:
		traj = run_flow(ens0, prob.model, prob.data, prob.loss, prob.flow)
	except NumericalDivergence as exc:
		if exc.last_finite is not None and len(exc.last_finite):
			save_trajectory(run_dir, exc.last_finite, {"kind": cfg.kind})
		raise
	save_trajectory(run_dir, traj, {"kind": cfg.kind})
	energies = np.asarray(traj.energies)
	drops = np.diff(energies)
	e0 = float(energies[0])
	drop = traj.energy_drop()
	dissipation = traj.dissipation_integral()
	summary = {
		"energy_initial": e0,
		"energy_final": float(energies[-1]),
		"energy_ratio": float(energies[-1] / e0) if e0 > 0 else None,
		"energy_monotone": bool(np.all(drops <= ENERGY_SLACK * np.maximum(1.0, np.abs(energies[:-1])))),
		"energy_drop": drop,
		"dissipation_integral": dissipation,
		"dissipation_mismatch": abs(drop - dissipation) / drop if drop > 0 else None,
		"halvings": traj.halvings,
		"n_states": len(traj),
	}
	verdict = "OK"
	target = cfg.params.get("energy_ratio_target")
	if target is not None:
		ratio = summary["energy_ratio"]
		met = ratio is not None and ratio <= float(target)
		summary["energy_ratio_target"] = float(target)
		summary["energy_ratio_met"] = met
		verdict = "PASS" if met else "FAIL"
	extra = {"trajectory": read_manifest(run_dir)["trajectory"]}
	return RunOutcome(verdict, summary, prob.descriptors(), extra)


def _run_stability(cfg: ExperimentConfig, run_dir: Path, seeds: Dict[str, int]) -> RunOutcome:
	prob = build_problem(cfg, seeds)
	p = cfg.params
	result = stability_experiment(
		prob.init,
		int(p["m_small"]),
		int(p["m_large"]),
		prob.model,
		prob.data,
		prob.loss,
		prob.flow,
		n_projections=int(p["n_projections"]),
		projection_seed=seeds["projections"],
	)
	d0 = result.distances[0] if result.distances else 0.0
	rows = []
	for t, d, method in zip(result.times, result.distances, result.methods):
		envelope = d0 * math.exp(result.rate_envelope * t)
		rows.append((t, d, method, envelope, d <= envelope * (1.0 + 1e-12)))
	write_rows_csv(run_dir / "stability.csv", ("t", "w2", "method", "envelope", "bound_ok"), rows)
	summary = {k: v for k, v in result.to_dict().items() if k != "table"}
	summary["table"] = [{"t": r[0], "w2": r[1], "method": r[2], "bound_ok": r[4]} for r in rows]
	return RunOutcome("PASS" if result.bound_holds else "FAIL", summary, prob.descriptors())


def _resolve_field(cfg: ExperimentConfig, seeds: Dict[str, int]) -> tuple[FieldG, JsonDict]:
	desc = cfg.params["field"]
	if desc.get("name") == "ensemble":
		prob = build_problem(cfg, seeds)
		ens = sample_ensemble(prob.init, int(cfg.init["m"]))
		g = EnsembleField(ens, prob.model, prob.data, prob.loss, prob.flow.truncation)
		return g, prob.descriptors()
	g = field_from_descriptor(desc)
	return g, {"field": g.describe()}


def _perturbation_plan(kinds: Sequence[str], n_starts: int, epsilon: float, d_w: int, rng, v) -> List:
	return [make_perturbation(kind, epsilon, d_w, rng, v=v) for kind in kinds for _ in range(n_starts)]


def _run_escape_scalar(cfg: ExperimentConfig, run_dir: Path, seeds: Dict[str, int]) -> RunOutcome:
	p = cfg.params
	g, descriptors = _resolve_field(cfg, seeds)
	try:
		ledger = build_escape_set_scalar(
			g,
			tuple(float(x) for x in p["eta_search"]),
			n_boundary=int(p["n_boundary"]),
			theta_scale=float(p["theta_scale"]),
			seed=seeds["sampler"],
		)
	except NoEscapeSet as exc:
		logger.warning("No escape set: %s", exc.reason)
		report = {"verdict": "FAIL", "reason": exc.reason, "evidence": _plain(exc.evidence)}
		write_escape_report(run_dir, report)
		return RunOutcome("FAIL", {"reason": exc.reason}, descriptors)

	rng = np.random.default_rng(seeds["perturbations"])
	kinds = list(p["perturbations"])
	starts = sample_escape_set(ledger, g, int(p["trials"]), rng, theta_scale=float(p["theta_scale"]))
	perts = _perturbation_plan(kinds, len(starts), ledger.epsilon, 1, rng, [float(ledger.sign)])
	rate = verify_escape_rate(
		g,
		starts * len(kinds),
		perts,
		ledger.guaranteed_rate,
		t_end=float(p["t_end"]),
		step_size=float(p["step_size"]),
		record_every=int(p["record_every"]),
		in_K=lambda T: ledger.in_K(g, T),
		rate_of=ledger.rate_of,
	)
	verdict = rate.verdict
	if verdict == "PASS" and ledger.kind in ("bounded", "whole-space") and rate.k_exits:
		verdict = "FAIL"
	summary: JsonDict = {
		"ledger": ledger.to_dict(),
		"rate_verdict": rate.verdict,
		"min_rate": rate.min_rate,
		"k_exits": rate.k_exits,
		"linear_fraction": rate.linear_fraction,
		"n_trials": len(rate.trials),
	}
	if ledger.r_bar is not None:
		regimes = [regime_bookkeeping(t.trajectory, ledger, g) for t in rate.trials]
		summary["regimes_ok"] = all(r.ok for r in regimes)
		summary["regime_counts"] = {
			k: sum(r.counts()[k] for r in regimes) for k in ("small", "medium", "large")
		}
	report = {"verdict": verdict, "ledger": ledger.to_dict(), "rate": rate.to_dict(), **{k: v for k, v in summary.items() if k.startswith("regime")}}
	write_escape_report(run_dir, report, [t.trajectory for t in rate.trials])
	return RunOutcome(verdict, summary, descriptors)


def _run_escape_vector(cfg: ExperimentConfig, run_dir: Path, seeds: Dict[str, int]) -> RunOutcome:
	p = cfg.params
	g, descriptors = _resolve_field(cfg, seeds)
	summary: JsonDict = {}
	if p.get("maximizer_start") is not None:
		construction = stable_set_from_maximizer(
			g,
			p["maximizer_start"],
			eta_fraction=float(p["eta_fraction"]),
			n_samples=int(p["n_samples"]),
			seed=seeds["sampler"],
		)
		check, cert, eta, v = construction.check, construction.cert, construction.eta, construction.maximizer.v
		summary["maximizer"] = construction.maximizer.to_dict()
		summary["local_constants"] = construction.constants.to_dict()
	else:
		v = p.get("v")
		if v is None:
			v = getattr(g, "v", None)
		if v is None:
			raise ConfigError("escape-vector needs params.v for fields without a built-in direction")
		eta = float(p["eta"])
		check = cond_refined_check(
			g, v, eta, n_samples=int(p["n_samples"]), theta_scale=float(p["theta_scale"]), seed=seeds["sampler"]
		)
		cert = stable_set_from_check(check, v, eta) if check.passed else None
	summary["refined_condition"] = check.to_dict()
	summary["eta"] = eta
	report: JsonDict = {"refined_condition": check.to_dict(), **{k: summary[k] for k in ("maximizer", "local_constants") if k in summary}}
	trajectories = []
	if cert is None:
		verdict = check.verdict
	else:
		rng = np.random.default_rng(seeds["perturbations"])
		kinds = list(p["perturbations"])
		starts = sample_stable_set(cert, check.K_points, int(p["trials"]), rng)
		perts = _perturbation_plan(kinds, len(starts), cert.epsilon, g.d_w, rng, cert.v)
		result = verify_stable_set_vector(
			g,
			cert,
			starts * len(kinds),
			perts,
			t_end=float(p["t_end"]),
			step_size=float(p["step_size"]),
			record_every=int(p["record_every"]),
		)
		verdict = result.verdict
		full = result.to_dict()
		report["stable_set"] = full
		summary["certificate"] = cert.to_dict()
		summary["set_exits"] = sum(1 for t in result.valid if t.left_K)
		summary["speed_floor_met"] = result.speed_floor_met
		summary["min_speed_margin"] = result.min_speed_margin
		summary["n_outside_A"] = full["n_outside_A"]
		trajectories = [t.trajectory for t in result.trials]
	if p.get("naive_w_norms"):
		eps = cert.epsilon if cert is not None else 0.1 * eta
		naive = naive_construction_demo(g, eta, eps, [float(w) for w in p["naive_w_norms"]], seed=seeds["sampler"])
		summary["naive_demo"] = report["naive_demo"] = naive.to_dict()
	report["verdict"] = verdict
	write_escape_report(run_dir, report, trajectories)
	return RunOutcome(verdict, summary, descriptors)


def _run_hardmax_scan(cfg: ExperimentConfig, run_dir: Path, seeds: Dict[str, int]) -> RunOutcome:
	p = cfg.params
	d, n = int(p["d"]), int(p["n"])
	contexts = np.random.default_rng(seeds["sampler"]).standard_normal((int(p["n_contexts"]), n, d))
	sphere = SphereSampler(d * d, int(p["directions"]), seed=seeds["projections"], kind=str(p["sphere_kind"]))
	scan = hardmax_convergence_scan(contexts, sphere, p["r_grid"], tie_tol=float(p["tie_tol"]))
	write_scan_csv(run_dir / "scan.csv", scan)
	write_gnuplot_dat(run_dir / "scan.dat", scan_plot_columns(scan), title="hardmax gap scan")
	summary = scan.to_dict()
	decreasing = bool(np.all(np.diff(scan.sup_gaps) < 0))
	rate = rate_check(scan, r_min=float(p["rate_r_min"]), tolerance=float(p["rate_tolerance"]))
	target = float(p["target_gap"])
	summary["strictly_decreasing"] = decreasing
	summary["rate_check"] = rate.to_dict()
	summary["target_gap"] = target
	summary["r_for_target_gap"] = rate.r_for_gap(target)
	summary["target_gap_reached"] = bool(float(scan.sup_gaps[-1]) < target)
	passed = scan.hull_ok and decreasing and rate.passed
	threshold = p.get("gap_threshold")
	if threshold is not None:
		summary["gap_threshold"] = float(threshold)
		passed = passed and float(scan.sup_gaps[-1]) < float(threshold)
	write_json_atomic(run_dir / "scan_summary.json", summary)
	return RunOutcome("PASS" if passed else "FAIL", summary, {"contexts": {"N": int(p["n_contexts"]), "n": n, "d": d}})


def _run_sigmoid_asymptotics(cfg: ExperimentConfig, run_dir: Path, seeds: Dict[str, int]) -> RunOutcome:
	p = cfg.params
	d = int(p["d_in"])
	density = density_from_config(p["density"], d)
	f = scalar_function(str(p["f"]))
	theta = p.get("theta")
	if theta is None:
		theta = np.eye(d)[0]
	half = sigmoid_halfspace_check(f, theta, p["r_grid"], density=density, n_samples=int(p["n_samples"]), seed=seeds["sampler"])
	grad = sigmoid_gradient_limit_check(f, density, theta, p["r_grid"], n_samples=int(p["n_surface"]), seed=seeds["projections"])
	last = half.last
	passed = last.within(3.0)
	if p["f"] == "one":
		# Symmetric densities give exactly 1/2 at every scale.
		passed = passed and abs(last.finite - 0.5) <= 3.0 * last.stderr
	summary = {
		"density": density.describe(),
		"f": p["f"],
		"halfspace": half.to_dict(),
		"gradient": grad.to_dict(),
	}
	write_json_atomic(run_dir / "sigmoid_limits.json", summary)
	write_gnuplot_dat(
		run_dir / "halfspace.dat",
		{"r": [row.r for row in half.rows], "gap": [row.gap for row in half.rows], "stderr": [row.stderr for row in half.rows]},
		title="sigmoid half-space limit",
	)
	write_gnuplot_dat(
		run_dir / "gradient.dat",
		{"r": [row.r for row in grad.rows], "gap": [row.gap for row in grad.rows], "stderr": [row.stderr for row in grad.rows]},
		title="sigmoid gradient limit",
	)
	return RunOutcome("PASS" if passed else "FAIL", summary, {"density": density.describe()})


def _run_attention_limit(cfg: ExperimentConfig, run_dir: Path, seeds: Dict[str, int]) -> RunOutcome:
	p = cfg.params
	A = np.asarray(p["A"], dtype=np.float64)
	if A.shape != (int(p["d"]), int(p["d"])):
		raise ConfigError(f"params.A must be {p['d']}x{p['d']}, got shape {A.shape}")
	report = attention_gradient_limit_explore(
		context_function(str(p["f"])),
		A,
		p["r_grid"],
		n=int(p["n"]),
		n_samples=int(p["n_samples"]),
		token_scale=float(p["token_scale"]),
		alpha_floor=float(p["alpha_floor"]),
		seed=seeds["sampler"],
	)
	summary = report.to_dict()
	write_json_atomic(run_dir / "attention_limit.json", summary)
	write_gnuplot_dat(
		run_dir / "attention_limit.dat",
		{"r": [row.r for row in report.rows], "gap": [row.gap for row in report.rows], "stderr": [row.stderr for row in report.rows]},
		title=f"{CONJECTURE_LABEL}: attention gradient limit",
	)
	return RunOutcome("EXPLORATORY", summary, {"tokens": {"n": int(p["n"]), "d": int(p["d"])}})


def _run_w2_selftest(cfg: ExperimentConfig, run_dir: Path, seeds: Dict[str, int]) -> RunOutcome:
	p = cfg.params
	res = w2_oracle_suite(int(p["instances"]), int(p["max_m"]), int(p["dimension"]), seed=seeds["sampler"])
	print(res.line())
	write_json_atomic(run_dir / "selftest.json", res.to_dict())
	return RunOutcome(res.verdict, res.to_dict())


RUNNERS: Dict[str, Callable[[ExperimentConfig, Path, Dict[str, int]], RunOutcome]] = {
	"simulate": _run_simulate,
	"stability": _run_stability,
	"escape-scalar": _run_escape_scalar,
	"escape-vector": _run_escape_vector,
	"hardmax-scan": _run_hardmax_scan,
	"sigmoid-asymptotics": _run_sigmoid_asymptotics,
	"attention-limit": _run_attention_limit,
	"w2-selftest": _run_w2_selftest,
}


def _write_manifest(cfg: ExperimentConfig, run_dir: Path, seeds: Dict[str, int], outcome: RunOutcome) -> None:
	manifest = {
		"kind": cfg.kind,
		"version": __version__,
		"config": cfg.to_dict(),
		"seeds": seeds,
		"descriptors": outcome.descriptors,
		"verdict": outcome.verdict,
		"summary": outcome.summary,
		**outcome.manifest_extra,
		"artifacts": describe_artifacts(run_dir),
		"written_at": datetime.now().isoformat(),
	}
	write_json_atomic(run_dir / "manifest.json", manifest)


def run_experiment(cfg: ExperimentConfig) -> int:
	"""Execute one experiment and write its manifest; returns the exit code."""

	run_dir = Path(cfg.output)
	run_dir.mkdir(parents=True, exist_ok=True)
	seeds = derive_seeds(cfg.seed, SEED_NAMES)
	logger.info("Running %s (seed %d) into %s", cfg.kind, cfg.seed, run_dir)
	try:
		outcome = RUNNERS[cfg.kind](cfg, run_dir, seeds)
	except NumericalDivergence as exc:
		logger.error("Run diverged: %s", exc)
		last = exc.last_finite
		extra: JsonDict = {}
		if isinstance(last, tuple):
			extra["last_finite"] = _plain(last)
		elif last is not None and hasattr(last, "times") and len(last):
			extra["last_finite_time"] = float(last.times[-1])
		outcome = RunOutcome(
			"DIVERGED",
			{"step": exc.step, "time": exc.time, "reason": exc.reason, **extra},
			manifest_extra=_divergence_extra(run_dir),
		)
		_write_manifest(cfg, run_dir, seeds, outcome)
		return EXIT_DIVERGENCE
	_write_manifest(cfg, run_dir, seeds, outcome)
	logger.info("%s verdict: %s", cfg.kind, outcome.verdict)
	return outcome.exit_code


def _divergence_extra(run_dir: Path) -> JsonDict:
	try:
		info = read_manifest(run_dir).get("trajectory")
	except ManifestError:
		return {}
	return {"trajectory": info} if isinstance(info, dict) else {}


# --- report -------------------------------------------------------------------


def sparkline(values: Sequence[float]) -> str:
	"""One block character per value, scaled between the finite min and max."""

	vals = np.asarray(values, dtype=np.float64)
	finite = vals[np.isfinite(vals)]
	if finite.size == 0:
		return ""
	lo, hi = float(finite.min()), float(finite.max())
	span = hi - lo
	out = []
	for v in vals:
		if not math.isfinite(v):
			out.append(" ")
			continue
		k = 0 if span == 0 else int(round((v - lo) / span * (len(SPARK_CHARS) - 1)))
		out.append(SPARK_CHARS[k])
	return "".join(out)


def _fmt(value: Any) -> str:
	if isinstance(value, float):
		return f"{value:.6g}"
	if value is None:
		return "-"
	return str(value)


def _report_simulate(run_dir: Path, manifest: JsonDict, out) -> None:
	s = manifest["summary"]
	path = run_dir / "scalars.csv"
	if path.is_file():
		with open(path, newline="", encoding="utf-8") as f:
			energies = [float(row["energy"]) for row in csv.DictReader(f)]
		print(f"  energy      {sparkline(energies)}", file=out)
	print(f"  energy      {_fmt(s.get('energy_initial'))} -> {_fmt(s.get('energy_final'))} (ratio {_fmt(s.get('energy_ratio'))})", file=out)
	print(f"  monotone    {s.get('energy_monotone')}, halvings {s.get('halvings')}", file=out)
	print(f"  dissipation {_fmt(s.get('dissipation_integral'))} vs drop {_fmt(s.get('energy_drop'))} (mismatch {_fmt(s.get('dissipation_mismatch'))})", file=out)
	if "energy_ratio_target" in s:
		print(f"  target      energy ratio {_fmt(s.get('energy_ratio'))} vs {_fmt(s['energy_ratio_target'])}: {'met' if s.get('energy_ratio_met') else 'not met'}", file=out)


def _report_stability(run_dir: Path, manifest: JsonDict, out) -> None:
	s = manifest["summary"]
	print(f"  C_hat       {_fmt(s.get('rate_envelope'))} (least squares {_fmt(s.get('rate_lsq'))})", file=out)
	table = s.get("table", [])
	print(f"  W2          {sparkline([row['w2'] for row in table])}", file=out)
	for row in table:
		print(f"    t={row['t']:<8.4g} W2={row['w2']:<12.6g} {row['method']:6} bound {'ok' if row['bound_ok'] else 'VIOLATED'}", file=out)


def _report_escape_scalar(run_dir: Path, manifest: JsonDict, out) -> None:
	s = manifest["summary"]
	if "reason" in s:
		print(f"  no escape set: {s['reason']}", file=out)
		return
	ledger = s["ledger"]
	print(f"  ledger      kind={ledger['kind']} A={ledger.get('A')}", file=out)
	for key in ("eta", "epsilon", "w_rate", "w_min", "r_bar", "tau", "c"):
		if ledger.get(key) is not None:
			print(f"    {key:9} {_fmt(ledger[key])}", file=out)
	quantity = "d|w|/dt" if ledger.get("rate_of") == "speed" else "d(|w|^2/2)/dt"
	print(f"  rate        min {quantity} {_fmt(s.get('min_rate'))} vs {_fmt(ledger.get('escape_rate'))} over {s.get('n_trials')} trials ({s.get('rate_verdict')})", file=out)
	print(f"  K exits     {s.get('k_exits')}, linear fraction {_fmt(s.get('linear_fraction'))}", file=out)
	if "regimes_ok" in s:
		print(f"  regimes     ok={s['regimes_ok']} counts={s['regime_counts']}", file=out)


def _report_escape_vector(run_dir: Path, manifest: JsonDict, out) -> None:
	s = manifest["summary"]
	rc = s["refined_condition"]
	print(f"  condition   lhs {_fmt(rc['lhs'])} < rhs {_fmt(rc['rhs'])}: {rc['verdict']} {rc.get('reason') or ''}".rstrip(), file=out)
	if rc.get("delta_window"):
		lo, hi = rc["delta_window"]
		print(f"  delta       window ({lo:.6g}, {hi:.6g})", file=out)
	if "local_constants" in s:
		lc = s["local_constants"]
		print(f"  c1, c2      {_fmt(lc['c1'])}, {_fmt(lc['c2'])}", file=out)
	if "certificate" in s:
		cert = s["certificate"]
		print(f"  certificate eta={_fmt(cert['eta'])} delta={_fmt(cert['delta'])} epsilon={_fmt(cert['epsilon'])}", file=out)
		rule = "eta*delta - eps" if cert.get("aligned") else cert.get("speed_floor_rule", "")
		print(f"  speed floor {rule} = {_fmt(cert.get('speed_floor_unperturbed'))} (eps = 0), {_fmt(cert.get('speed_floor'))} (perturbed)", file=out)
		print(f"  set exits   {s.get('set_exits')}, speed floor met: {s.get('speed_floor_met')} (margin {_fmt(s.get('min_speed_margin'))})", file=out)


def _report_hardmax(run_dir: Path, manifest: JsonDict, out) -> None:
	s = manifest["summary"]
	print(f"  sup gap     {sparkline(s['sup_gaps'])}", file=out)
	for r, gap, se in zip(s["r_grid"], s["sup_gaps"], s["sup_stderr"]):
		print(f"    r={r:<8.4g} gap={gap:.6g} (se {se:.2g})", file=out)
	print(f"  hull ok     {s['hull_ok']}, strictly decreasing {s.get('strictly_decreasing')}", file=out)
	rate = s.get("rate_check")
	if rate:
		consts = ", ".join(f"{k:.3g}" for k in rate["constants"])
		print(f"  rate        gap / {rate['rate']} = [{consts}] (exponent {rate['fitted_exponent']:.3f}): {'PASS' if rate['pass'] else 'FAIL'}", file=out)
	if "target_gap" in s:
		reached = "reached" if s.get("target_gap_reached") else f"predicted at r = {_fmt(s.get('r_for_target_gap'))}"
		print(f"  gap {s['target_gap']:g}   {reached}", file=out)
	if "gap_threshold" in s:
		print(f"  threshold   {_fmt(s['gap_threshold'])}", file=out)


def _report_sigmoid(run_dir: Path, manifest: JsonDict, out) -> None:
	s = manifest["summary"]
	for name in ("halfspace", "gradient"):
		table = s[name]
		print(f"  {name:11} gap {sparkline([row['gap'] for row in table['rows']])}", file=out)
		last = table["rows"][-1]
		print(f"    r={last['r']:.4g}: gap {last['gap']:.3g}, stderr {last['stderr']:.3g}", file=out)


def _report_attention(run_dir: Path, manifest: JsonDict, out) -> None:
	s = manifest["summary"]
	print(f"  [{s['label']}] skipped fraction {s['skipped_fraction']:.3g}", file=out)
	for row in s["rows"]:
		print(f"    r={row['r']:<8.4g} gap={row['gap']:.6g} (se {row['stderr']:.2g})", file=out)
	print(f"  consecutive gaps shrink: {s['cauchy_consistent']}", file=out)


def _report_w2(run_dir: Path, manifest: JsonDict, out) -> None:
	print(f"  {manifest['summary'].get('detail', '')}", file=out)


_REPORTERS = {
	"simulate": _report_simulate,
	"stability": _report_stability,
	"escape-scalar": _report_escape_scalar,
	"escape-vector": _report_escape_vector,
	"hardmax-scan": _report_hardmax,
	"sigmoid-asymptotics": _report_sigmoid,
	"attention-limit": _report_attention,
	"w2-selftest": _report_w2,
}


def report(run_dir: Path, out=None) -> int:
	"""Print a summary of a finished run; exit 2 on a missing or corrupt manifest."""

	out = out or sys.stdout
	run_dir = Path(run_dir)
	manifest = read_manifest(run_dir)
	kind = manifest["kind"]
	print(f"{kind} run in {run_dir} (seed {manifest.get('config', {}).get('seed')}, version {manifest.get('version')})", file=out)
	print(f"  verdict     {manifest.get('verdict')}", file=out)
	reporter = _REPORTERS.get(kind)
	if reporter is not None and manifest.get("verdict") != "DIVERGED":
		try:
			reporter(run_dir, manifest, out)
		except (KeyError, TypeError, ValueError) as exc:
			raise ManifestError(f"manifest summary of {run_dir} is incomplete: {exc}") from exc
	elif manifest.get("verdict") == "DIVERGED":
		print(f"  divergence  {manifest['summary'].get('reason')} at t={_fmt(manifest['summary'].get('time'))}", file=out)
	print("  files:", file=out)
	for name in describe_artifacts(run_dir):
		size = (run_dir / name).stat().st_size
		print(f"    {name:40} {size:>10d} bytes", file=out)
	return EXIT_OK


# --- entry point ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
	common = argparse.ArgumentParser(add_help=False)
	common.add_argument("--threads", type=int, default=None, help="Upper bound on worker threads.")
	common.add_argument("--dev", action="store_true", help="Developer mode: DEBUG logging for every subsystem.")
	common.add_argument("--log-level", choices=LOG_LEVELS, default="INFO", help="Root log level (default INFO).")

	ap = argparse.ArgumentParser(
		prog="MeanFieldLab",
		description="Mean-field gradient-flow experiments: simulation, stability, escape sets and large-scale limits.",
	)
	sub = ap.add_subparsers(dest="command", required=True)
	p_run = sub.add_parser("run", parents=[common], help="Run the experiment described by a config file.")
	p_run.add_argument("config", type=Path, help="Experiment config (JSON, // comment lines allowed).")
	p_run.add_argument("--seed", type=int, default=None, help="Override the config seed.")
	p_run.add_argument("--output", type=str, default=None, help="Override the output directory.")
	p_report = sub.add_parser("report", parents=[common], help="Summarize a finished run directory.")
	p_report.add_argument("run_dir", type=Path)
	p_self = sub.add_parser("selftest", parents=[common], help="Run the oracle suites and print PASS/FAIL lines.")
	p_self.add_argument("--full", action="store_true", help="Full-size draws instead of the quick sizes.")
	p_self.add_argument("--seed", type=int, default=0)
	return ap


def _configure_logging(level: str, dev: bool) -> None:
	logging.basicConfig(level=getattr(logging, level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
	logging.getLogger().setLevel(getattr(logging, level))
	if dev:
		apply_log_verbosity(enabled=True)


def main(argv: Optional[List[str]] = None) -> int:
	ns = build_parser().parse_args(argv)
	_configure_logging(ns.log_level, ns.dev)
	try:
		set_thread_cap(ns.threads)
	except ValueError as exc:
		print(str(exc), file=sys.stderr)
		return EXIT_VALIDATION

	if ns.command == "selftest":
		results = run_selftest(quick=not ns.full, seed=ns.seed)
		for res in results:
			print(res.line())
		return EXIT_OK if all(r.passed for r in results) else EXIT_VERDICT_FAIL

	if ns.command == "report":
		try:
			return report(ns.run_dir)
		except ManifestError as exc:
			print(str(exc), file=sys.stderr)
			return EXIT_VALIDATION

	try:
		cfg = ConfigManager(ns.config).load().with_overrides(seed=ns.seed, output=ns.output)
		if is_developer_mode(cfg) and not ns.dev:
			apply_log_verbosity(enabled=True)
		logger.debug(developer_mode_status_text(cfg))
		return run_experiment(cfg)
	except (ConfigError, ValueError) as exc:
		logger.error("Invalid experiment: %s", exc)
		print(f"error: {exc}", file=sys.stderr)
		return EXIT_VALIDATION
	except (OSError, requests.RequestException) as exc:
		logger.error("Run failed: %s", exc, exc_info=True)
		print(f"error: {exc}", file=sys.stderr)
		return EXIT_RUNTIME_ERROR
	except Exception as exc:
		logger.exception("Unexpected failure in %s", ns.config)
		print(f"error: {exc}", file=sys.stderr)
		return EXIT_RUNTIME_ERROR
