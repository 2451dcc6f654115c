"""Scenario runs: reachable tubes, closed-loop MPC and heat analysis."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import export, setalg, thermal
from .dynamics import EntryModel, PiecewiseControl, integrate_rk4
from .montecarlo import monte_carlo_validate
from .nmpc import mpc_loop, reference_from_tube
from .reach import ReachTube, reach
from .scenario import ScenarioConfig, write_resolved

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    kind: str
    scenario: str
    seed: int
    hull_rows: list = field(default_factory=list)
    containment: dict = field(default_factory=lambda: {"checked": False, "violations": 0})
    heat: dict = field(default_factory=dict)
    tracking: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    files: list = field(default_factory=list)
    constrained: bool = False

    def to_dict(self) -> dict:
        return {
            "schema_version": export.SCHEMA_VERSION,
            "kind": self.kind,
            "scenario": self.scenario,
            "seed": self.seed,
            "constrained": self.constrained,
            "hull_table": [
                {"branch": r["branch"], "step": r["step"], "t": r["t_end"],
                 "lower": r["box"].lower.tolist(), "upper": r["box"].upper.tolist()}
                for r in self.hull_rows
            ],
            "containment": _jsonable(self.containment),
            "heat": _jsonable(self.heat),
            "tracking": _jsonable(self.tracking),
            "timings": self.timings,
            "warnings": self.warnings,
            "files": self.files,
        }


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return export._finite(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def model_for(cfg: ScenarioConfig) -> EntryModel:
    return EntryModel(cfg.vehicle, cfg.environment)


def heat_constraint(cfg: ScenarioConfig):
    """Per-step heat-rate halfspace, re-anchored at the centre of each new set."""
    params = cfg.thermal.params
    env = cfg.environment

    def build(z):
        return thermal.heat_limit_halfspace(z.center[:2], params, env)

    return build


def _out_dir(cfg: ScenarioConfig, out_dir) -> Path:
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _heat_bounds(cfg, tube: ReachTube):
    params, env = cfg.thermal.params, cfg.environment
    rows = []
    for branch, k, t, z in [(tube.branches[0], 0, 0.0, tube.initial_set)] + [
            (s.branch_id, tube.step_index(s), s.t_end, s.set) for s in tube.steps]:
        q = thermal.max_heat_rate_over_set(z, params, env)
        rows.append((branch, k, float(t), float(q), float(thermal.surface_temperature(q, params))))
    return rows


def _audit_anchors(cfg, tube: ReachTube):
    """Trust-box audit of the halfspace built at every stored set's centre."""
    params, env, th = cfg.thermal.params, cfg.environment, cfg.thermal
    worst, ok_all = 0.0, True
    anchors = [tube.initial_set.center[:2]] + [s.set.center[:2] for s in tube.steps]
    for i, a in enumerate(anchors):
        hs = thermal.heat_limit_halfspace(a, params, env)
        ok, ratio, _ = thermal.audit_halfspace(hs, a, th.trust_box, audit_factor=th.audit_factor,
                                               seed=cfg.seed + i, params=params, env=env)
        ok_all &= ok
        worst = max(worst, ratio)
    return ok_all, worst


def compute_tube(cfg: ScenarioConfig, constrained: bool = False, time_step=None, horizon=None, max_order=None):
    rcfg = cfg.reach_config(time_step, horizon, max_order)
    constraints = [heat_constraint(cfg)] if constrained else []
    return reach(model_for(cfg), cfg.initial_set(), rcfg, constraints)


def run_reach(cfg: ScenarioConfig, constrained: bool = False, out_dir=None, validate: bool | None = None):
    """Reachable tube, exports and (for unconstrained runs) the Monte Carlo audit."""
    out = _out_dir(cfg, out_dir)
    report = RunReport("reach", cfg.name, cfg.seed, constrained=constrained)
    report.files.append(str(write_resolved(cfg, out)))
    t0 = time.perf_counter()
    tube = compute_tube(cfg, constrained)
    report.timings["reach_s"] = time.perf_counter() - t0
    report.warnings.extend(tube.warnings)
    for b, t in tube.terminated.items():
        report.warnings.append(f"branch {b} emptied by the heat constraint at t={t:g}")

    report.hull_rows = export.hull_table(tube)
    tag = "constrained" if constrained else "unconstrained"
    report.files.append(str(export.write_tube_csv(report.hull_rows, out / f"tube_{tag}.csv")))
    report.files.append(str(export.write_tube_json(tube, out / f"tube_{tag}.json")))

    params = cfg.thermal.params
    v_lo = min(r["box"].lower[1] for r in report.hull_rows)
    v_hi = max(r["box"].upper[1] for r in report.hull_rows)
    curve = thermal.limit_curve(max(v_lo, 1.0), v_hi, 100, params, cfg.environment)
    report.files.append(str(export.tube_projection_svg(
        tube, out / f"tube_{tag}_vh.svg", title=f"{cfg.name}: altitude-velocity tube ({tag})", limit_curve=curve)))
    for dim, label in ((0, "h [m]"), (1, "v [m/s]")):
        report.files.append(str(export.hull_time_svg(report.hull_rows, dim, out / f"tube_{tag}_{label[0]}_t.svg",
                                                     label, f"{cfg.name}: {label} hulls ({tag})")))

    heat_rows = _heat_bounds(cfg, tube)
    report.files.append(str(export.write_csv(out / f"heat_bounds_{tag}.csv", "heat_bounds", heat_rows)))
    report.heat = {"max_rate_bound": max(r[3] for r in heat_rows), "limit": params.Qdot_max}
    if constrained:
        ok, worst = _audit_anchors(cfg, tube)
        report.heat.update({"halfspace_audit_ok": ok, "halfspace_audit_worst_ratio": worst})
        if not ok:
            report.warnings.append("heat halfspace audit exceeded the audit factor")

    if validate is None:
        validate = not constrained
    if validate:
        t0 = time.perf_counter()
        v = cfg.validation
        mc = monte_carlo_validate(tube, model_for(cfg), cfg.input_set(), v.n_samples, cfg.seed, v.substeps, v.slack)
        report.timings["validate_s"] = time.perf_counter() - t0
        report.containment = {"checked": True, "samples": mc.n_samples, **mc.to_dict()}
    report.files.append(str(out / f"report_reach_{tag}.json"))
    export.write_json(out / f"report_reach_{tag}.json", report.to_dict(), "hyreach/report/1")
    return report, tube


def run_validate(cfg: ScenarioConfig, tube: ReachTube, n_samples=None, seed=None, out_dir=None):
    out = _out_dir(cfg, out_dir)
    v = cfg.validation
    seed = cfg.seed if seed is None else seed
    report = RunReport("validate", cfg.name, seed)
    t0 = time.perf_counter()
    mc = monte_carlo_validate(tube, model_for(cfg), cfg.input_set(), n_samples or v.n_samples, seed,
                              v.substeps, v.slack)
    report.timings["validate_s"] = time.perf_counter() - t0
    report.containment = {"checked": True, "samples": mc.n_samples, **mc.to_dict()}
    report.files.append(str(out / "report_validate.json"))
    export.write_json(out / "report_validate.json", report.to_dict(), "hyreach/report/1")
    return report, mc


def run_mpc(cfg: ScenarioConfig, out_dir=None, tube_constraint: bool = True):
    """Tube at the controller's sample time, centre references, closed loop, exports."""
    if cfg.mpc is None:
        raise ValueError("scenario has no mpc block")
    out = _out_dir(cfg, out_dir)
    m = cfg.mpc
    report = RunReport("mpc", cfg.name, cfg.seed, constrained=m.heat_constrained)
    report.files.append(str(write_resolved(cfg, out)))
    t0 = time.perf_counter()
    # the tube runs on the scenario's reach step and is held between its
    # boundaries; it must cover the last prediction window, N samples past the end
    dt = cfg.reach.time_step
    horizon = math.ceil((m.duration + m.N * m.Ts) / dt - 1e-9) * dt
    tube = compute_tube(cfg, m.heat_constrained, horizon=horizon, max_order=m.max_order)
    report.timings["reach_s"] = time.perf_counter() - t0
    report.warnings.extend(tube.warnings)
    for b, t in tube.terminated.items():
        report.warnings.append(f"branch {b} emptied by the heat constraint at t={t:g}")
    if not tube.steps:
        q0 = thermal.heat_rate(cfg.center[0], cfg.center[1], cfg.thermal.params, cfg.environment)
        raise setalg.EmptySetError(
            f"heat-constrained tube is empty after the first step (nominal heat rate at start "
            f"{q0:.4g} W/m^2, limit {cfg.thermal.Qdot_max:.4g} W/m^2)")

    U = cfg.input_set()
    refs = reference_from_tube(tube, U, sampling_time=m.Ts)
    params, env = cfg.thermal.params, cfg.environment
    model = model_for(cfg)
    n_steps = int(round(m.duration / m.Ts))
    t0 = time.perf_counter()
    lg = mpc_loop(np.array(cfg.center), tube, refs, cfg.mpc_config(), U, n_steps, model=model,
                  heat=lambda x: thermal.heat_rate(x[0], max(x[1], 0.0), params, env),
                  constraint_tube=tube_constraint)
    report.timings["mpc_s"] = time.perf_counter() - t0

    tag = "tube" if tube_constraint else "free"
    report.files.append(str(export.write_csv(out / f"closed_loop_{tag}.csv", "closed_loop", lg.rows())))
    report.files.append(str(export.write_tube_json(tube, out / "tube_mpc.json")))
    report.hull_rows = export.hull_table(tube, use_lp=False)
    report.files.append(str(export.write_tube_csv(report.hull_rows, out / "tube_mpc.csv")))

    stride = max(1, len(tube.steps) // 60)
    view = ReachTube(tube.initial_set, tube.time_step, tube.n_steps, tube.steps[::stride], tube.lineage)
    v = lg.states[:, 1]
    curve = thermal.limit_curve(max(v.min() - 100, 1.0), v.max() + 100, 100, params, env)
    report.files.append(str(export.tube_projection_svg(
        view, out / f"mpc_{tag}_vh.svg", title=f"{cfg.name}: tube and closed loop ({tag})",
        limit_curve=curve, trajectories=[(lg.states, "#1f3fbf")])))

    ubox = setalg.interval_hull(U)
    inside = lg.tube_slack[np.isfinite(lg.tube_slack)] >= -1e-9
    err = np.abs(lg.states - refs.x_ref[np.minimum(np.arange(len(lg.states)), len(refs) - 1)])
    crossing = thermal.first_crossing_time(lg.t, lg.states[:, 0], np.maximum(lg.states[:, 1], 0), params, env)
    report.tracking = {
        "samples": int(len(lg.t)),
        "tube_checked": int(inside.size),
        "tube_contained": int(inside.sum()),
        "contained_fraction": float(inside.mean()) if inside.size else float("nan"),
        "max_abs_error": err.max(axis=0),
        "rms_error": np.sqrt((err ** 2).mean(axis=0)),
        "inputs_within_bounds": bool(np.all((lg.inputs >= ubox.lower) & (lg.inputs <= ubox.upper))),
        "held_steps": int(lg.held.sum()),
        "statuses": {s: lg.status.count(s) for s in sorted(set(lg.status))},
    }
    report.heat = {"max_rate": float(np.max(lg.qdot)), "limit": params.Qdot_max,
                   "max_ratio": float(np.max(lg.qdot) / params.Qdot_max), "first_crossing_time": crossing}
    if lg.held.any():
        report.warnings.append(f"solver failed on {int(lg.held.sum())} steps; last input held")
    report.files.append(str(out / f"report_mpc_{tag}.json"))
    export.write_json(out / f"report_mpc_{tag}.json", report.to_dict(), "hyreach/report/1")
    return report, lg, tube


def nominal_trajectory(cfg: ScenarioConfig, samples_per_step: int = 10):
    """Centre trajectory under the input-box midpoint, sampled ``samples_per_step`` times per step."""
    rc = cfg.reach
    u_mid = setalg.interval_hull(cfg.input_set()).center
    ctrl = PiecewiseControl(rc.time_step, np.tile(u_mid, (int(round(rc.horizon / rc.time_step)), 1)))
    return integrate_rk4(np.array(cfg.center), ctrl, rc.horizon, rc.time_step / samples_per_step,
                         cfg.vehicle, cfg.environment)


def run_heat_analysis(cfg: ScenarioConfig, out_dir=None):
    """Limit curve, tube hulls and per-step heat-rate bounds with surface temperatures."""
    out = _out_dir(cfg, out_dir)
    params, env = cfg.thermal.params, cfg.environment
    report = RunReport("heat", cfg.name, cfg.seed)
    report.files.append(str(write_resolved(cfg, out)))
    t0 = time.perf_counter()
    tube = compute_tube(cfg, False)
    report.timings["reach_s"] = time.perf_counter() - t0
    report.warnings.extend(tube.warnings)
    report.hull_rows = export.hull_table(tube)
    report.files.append(str(export.write_tube_csv(report.hull_rows, out / "tube.csv")))

    v_lo = min(r["box"].lower[1] for r in report.hull_rows)
    v_hi = max(r["box"].upper[1] for r in report.hull_rows)
    curve = thermal.limit_curve(max(v_lo - 200, 1.0), v_hi + 200, 200, params, env)
    report.files.append(str(export.tube_projection_svg(
        tube, out / "heat_vh.svg", title=f"{cfg.name}: tube and heat-rate limit", limit_curve=curve)))

    bounds = _heat_bounds(cfg, tube)
    report.files.append(str(export.write_csv(out / "heat_bounds.csv", "heat_bounds", bounds)))
    t, X = nominal_trajectory(cfg)
    prof = thermal.heat_load(t, X[:, 0], X[:, 1], params, env)
    rows = [(float(a), float(h), float(v), float(q), float(Q), float(thermal.surface_temperature(q, params)))
            for a, h, v, q, Q in zip(t, X[:, 0], X[:, 1], prof.qdot, prof.load)]
    report.files.append(str(export.write_csv(out / "heat_profile.csv", "heat_profile", rows)))
    t_limit = thermal.surface_temperature(params.Qdot_max, params)
    report.heat = {
        "limit": params.Qdot_max,
        "limit_surface_temperature_K": t_limit,
        "limit_surface_temperature_C": t_limit - thermal.KELVIN_OFFSET,
        "per_step_max_rate": [r[3] for r in bounds],
        "per_step_surface_temperature_K": [r[4] for r in bounds],
        "steps_over_limit": [r[1] for r in bounds if r[3] > params.Qdot_max],
        "nominal_peak_rate": prof.peak_rate,
        "nominal_peak_time": prof.peak_time,
        "nominal_total_load": prof.total_load,
        "limit_curve_vh": curve,
    }
    report.files.append(str(out / "report_heat.json"))
    export.write_json(out / "report_heat.json", report.to_dict(), "hyreach/report/1")
    return report, tube

