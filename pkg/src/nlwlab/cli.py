"""Experiment driver: JSON configs, canned scenarios, artifact emission.

Subcommands: evolve, norms, diagnose, bootstrap, verify-W, linear-check.
Every run reads one JSON config, writes its artifacts into an output
directory, and finishes with a manifest.json recording the config echo, the
package version, wall time, and one pass/fail entry per enabled check; the
process exits 0 only if every enabled check passed.  Identical configs
produce byte-identical artifacts except for the manifest's wall-time field.

Config schema (see configs/ for one exemplar per scenario):

    {
      "scenario":  "evolve" | "norms" | "diagnose" | "bootstrap"
                   | "verify-W" | "linear-check",
      "equation":  {"p": 7.0, "mu": 1},
      "grid":      {"h": 0.01, "n": 5000},
      "initial":   {"kind": "W"}
                   | {"kind": "gaussian", "width": 1.0, "amplitude": 1.0}
                   | {"kind": "bump", "radius": 1.0, "amplitude": 1.0}
                   | {"kind": "ode_flat", "amplitude": 1.861}
                   | {"kind": "file", "path": "state.txt"},
      "run":       {"t_final": 1.0, "snapshot_stride": 1, "origin_band": 2,
                    "cone_floor": 1e-13 or null, "blowup_threshold": 1e12,
                    "linear": false},
      "output":    {"dir": "out"},
      "checks":    {<name>: <threshold>, ...}          (scenario-specific),
      "<scenario>": {...}          (options section named after the scenario)
    }

Malformed configs are reported with the offending field path.  The
environment variable NLWLAB_PRECISION (f64 | extended) selects the float
type used by the bootstrap arithmetic.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nlwlab import __version__, bootstrap, diagnostics, norms, solver
from nlwlab.core import (
    EquationParams,
    RadialGrid,
    RadialState,
    load_state,
    make_params,
    reference_W,
    reference_ode_blowup,
    save_state,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "build_initial",
    "main",
    "parse_config",
    "profile_bump",
    "profile_gaussian",
    "profile_ode_flat",
    "run",
]

SCENARIOS = ("evolve", "norms", "diagnose", "bootstrap", "verify-W", "linear-check")

_MISSING = object()


class ConfigError(ValueError):
    """Malformed configuration, reported with the offending field path."""


def _field(raw: dict, path: str, kind, default=_MISSING):
    node = raw
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if default is _MISSING:
                raise ConfigError(f"{path}: required field is missing")
            return default
        node = node[part]
    if kind is float:
        if isinstance(node, bool) or not isinstance(node, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {type(node).__name__}")
        return float(node)
    if kind is int:
        if isinstance(node, bool) or not isinstance(node, int):
            raise ConfigError(f"{path}: expected an integer, got {type(node).__name__}")
        return node
    if kind is bool:
        if not isinstance(node, bool):
            raise ConfigError(f"{path}: expected a boolean, got {type(node).__name__}")
        return node
    if kind is str:
        if not isinstance(node, str):
            raise ConfigError(f"{path}: expected a string, got {type(node).__name__}")
        return node
    if kind is dict:
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: expected an object, got {type(node).__name__}")
        return node
    if kind is list:
        if not isinstance(node, list):
            raise ConfigError(f"{path}: expected a list, got {type(node).__name__}")
        return node
    raise AssertionError(kind)


def _optional_float(raw: dict, path: str, default):
    """Float field that also accepts JSON null (returned as None)."""
    node = raw
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    if node is None:
        return None
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{path}: expected a number or null")
    return float(node)


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed and validated experiment configuration."""

    scenario: str
    params: EquationParams
    grid: RadialGrid
    initial: dict
    t_final: float
    snapshot_stride: int
    origin_band: int
    cone_floor: float | None
    blowup_threshold: float
    linear: bool
    out_dir: str | None
    checks: dict
    section: dict
    raw: dict


_SCENARIO_DEFAULTS = {
    # (p, mu, h, n, t_final, initial descriptor)
    "verify-W": (5.0, -1, 0.01, 5000, 1.0, {"kind": "W"}),
    "linear-check": (5.0, 1, 1.0, 2048, 2000.0, {"kind": "W"}),  # initial unused
    "bootstrap": (5.0, 1, 1.0, 2, 0.0, {"kind": "W"}),  # grid-free scenario
}

_SCENARIO_CHECKS = {
    "evolve": {"energy_drift", "finite_speed", "exterior_zero",
               "blowup_detection", "ode_match"},
    "norms": {"route_agreement", "l2_match", "tail_monotone", "hardy"},
    "diagnose": {"virial_consistency_order", "identity_order", "z_monotone",
                 "energy_drift"},
    "bootstrap": {"contraction_subunit", "iteration_monotone", "limit_gap",
                  "fixed_point"},
    "verify-W": {"static_drift", "decay_c0", "decay_slope", "tail_slope"},
    "linear-check": {"dalembert_error", "reversibility", "traveling_wave"},
}


def parse_config(raw: dict, scenario: str | None = None,
                 out_override: str | None = None) -> ExperimentConfig:
    """Validate a raw config dict against the schema (field-path errors)."""
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected a JSON object")
    declared = _field(raw, "scenario", str, default=None)
    if declared is None and scenario is None:
        raise ConfigError("scenario: required field is missing")
    if declared is not None and scenario is not None and declared != scenario:
        raise ConfigError(
            f"scenario: config says {declared!r} but the subcommand is {scenario!r}")
    name = scenario or declared
    if name not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario {name!r}")

    dp, dmu, dh, dn, dt_final, dinit = _SCENARIO_DEFAULTS.get(
        name, (5.0, 1, None, None, None, None))
    p = _field(raw, "equation.p", float, default=dp)
    mu = _field(raw, "equation.mu", int, default=dmu)
    if name == "verify-W" and (p != 5.0 or mu != -1):
        raise ConfigError("equation: scenario verify-W requires p = 5, mu = -1")
    try:
        params = make_params(p, mu)
    except ValueError as e:
        raise ConfigError(f"equation: {e}") from None

    h = _field(raw, "grid.h", float, default=dh)
    n = _field(raw, "grid.n", int, default=dn)
    if h is None or n is None:
        raise ConfigError("grid: h and n are required for this scenario")
    try:
        grid = RadialGrid(h=h, n=n)
    except ValueError as e:
        raise ConfigError(f"grid: {e}") from None

    initial = _field(raw, "initial", dict, default=dinit)
    if initial is None:
        raise ConfigError("initial: required field is missing")
    kind = _field({"initial": initial}, "initial.kind", str)
    if kind not in ("W", "gaussian", "bump", "ode_flat", "file"):
        raise ConfigError(f"initial.kind: unknown initial data kind {kind!r}")

    t_final = _field(raw, "run.t_final", float, default=dt_final)
    if t_final is None:
        raise ConfigError("run.t_final: required field is missing")
    cone_floor = _optional_float(raw, "run.cone_floor", 1e-13)
    if name == "verify-W":
        cone_floor = None  # the static profile is not compactly supported
    cfg = ExperimentConfig(
        scenario=name,
        params=params,
        grid=grid,
        initial=initial,
        t_final=t_final,
        snapshot_stride=_field(raw, "run.snapshot_stride", int, default=1),
        origin_band=_field(raw, "run.origin_band", int, default=2),
        cone_floor=cone_floor,
        blowup_threshold=_field(raw, "run.blowup_threshold", float, default=1e12),
        linear=_field(raw, "run.linear", bool, default=False),
        out_dir=out_override or _field(raw, "output.dir", str, default=None),
        checks=_field(raw, "checks", dict, default={}),
        section=_field(raw, name, dict, default={}),
        raw=raw,
    )
    if cfg.out_dir is None:
        raise ConfigError("output.dir: required (or pass --out)")
    if cfg.snapshot_stride < 1:
        raise ConfigError("run.snapshot_stride: must be >= 1")
    if cfg.origin_band < 2:
        raise ConfigError("run.origin_band: must be >= 2")
    for key in cfg.checks:
        if key not in _SCENARIO_CHECKS[name]:
            raise ConfigError(f"checks.{key}: unknown check for scenario {name}")
    return cfg


# --- initial data -------------------------------------------------------------


def profile_gaussian(r, width: float, amplitude: float):
    """amplitude * exp(-r^2 / (2 width^2))."""
    return amplitude * np.exp(-r * r / (2.0 * width * width))


def profile_bump(r, radius: float, amplitude: float):
    """Compactly supported mollifier: amplitude * e * exp(-1/(1 - (r/radius)^2))."""
    x = np.minimum(np.abs(r) / radius, 1.0)
    out = np.zeros_like(np.asarray(r, dtype=float))
    inside = x < 1.0
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def profile_ode_flat(r, amplitude: float):
    """Plateau of height amplitude on [0, 1], quintic ramp to zero on [1, 1.5].

    Matches the space-independent blowup solution near the origin; the ramp
    keeps the data compact so the blowup at r = 0 is causally isolated from
    the boundary.
    """
    y = np.clip((np.asarray(r, dtype=float) - 1.0) / 0.5, 0.0, 1.0)
    return amplitude * (1.0 - y ** 3 * (10.0 - 15.0 * y + 6.0 * y * y))


def ode_flat_blowup_time(params: EquationParams, amplitude: float) -> float:
    """T with c_p T^{-a} = amplitude, the blowup time of the plateau data."""
    a = params.a
    c_p = (a * (a + 1.0)) ** (1.0 / (params.p - 1.0))
    return (c_p / amplitude) ** (1.0 / a)


def build_initial(desc: dict, grid: RadialGrid, params: EquationParams) -> RadialState:
    """Materialize an initial-data descriptor on the grid."""
    kind = desc["kind"]
    r = grid.r
    if kind == "W":
        if params.p != 5.0 or params.mu != -1:
            raise ConfigError("initial.kind: W requires p = 5, mu = -1")
        return reference_W(grid)
    if kind == "gaussian":
        width = _field(desc, "width", float, default=1.0)
        amp = _field(desc, "amplitude", float, default=1.0)
        if width <= 0:
            raise ConfigError("initial.width: must be positive")
        return RadialState(grid=grid, params=params, t=0.0,
                           u=profile_gaussian(r, width, amp), v=np.zeros(grid.n + 1))
    if kind == "bump":
        radius = _field(desc, "radius", float, default=1.0)
        amp = _field(desc, "amplitude", float, default=1.0)
        if radius <= 0:
            raise ConfigError("initial.radius: must be positive")
        return RadialState(grid=grid, params=params, t=0.0,
                           u=profile_bump(r, radius, amp), v=np.zeros(grid.n + 1))
    if kind == "ode_flat":
        amp = _field(desc, "amplitude", float)
        if amp <= 0:
            raise ConfigError("initial.amplitude: must be positive")
        if params.mu != -1:
            raise ConfigError("initial.kind: ode_flat requires the focusing sign mu = -1")
        u0 = profile_ode_flat(r, amp)
        T = ode_flat_blowup_time(params, amp)
        # the exact solution grows like (T - t)^{-a}, so v = (a / T) u at t = 0
        return RadialState(grid=grid, params=params, t=0.0,
                           u=u0, v=(params.a / T) * u0)
    if kind == "file":
        path = _field(desc, "path", str)
        state = load_state(path)
        if state.grid != grid:
            raise ConfigError("initial.path: stored grid does not match config grid")
        if state.params != params:
            raise ConfigError("initial.path: stored parameters do not match config")
        return state
    raise ConfigError(f"initial.kind: unknown initial data kind {kind!r}")


# --- manifest plumbing --------------------------------------------------------


def _check(name: str, value: float, threshold: float, op: str = "<="):
    value = float(value)
    ok = {"<=": value <= threshold, "<": value < threshold,
          ">=": value >= threshold}[op]
    return {"name": name, "value": value, "threshold": float(threshold),
            "op": op, "pass": bool(ok)}


def _solver_config(cfg: ExperimentConfig, **overrides) -> solver.SolverConfig:
    kw = dict(grid=cfg.grid, params=cfg.params, t_final=cfg.t_final,
              snapshot_stride=cfg.snapshot_stride, origin_band=cfg.origin_band,
              linear=cfg.linear, cone_floor=cfg.cone_floor,
              blowup_threshold=cfg.blowup_threshold)
    kw.update(overrides)
    return solver.SolverConfig(**kw)


def _write(out: Path, name: str, text: str) -> None:
    (out / name).write_text(text)


def _write_states(out: Path, traj) -> None:
    for k, state in enumerate(traj.states):
        save_state(state, out / f"state_{k:06d}.txt")


# --- scenario runners ----------------------------------------------------------


def _run_evolve(cfg: ExperimentConfig, out: Path, threads: int):
    checks, notes = [], []
    extra = {}
    initial = build_initial(cfg.initial, cfg.grid, cfg.params)
    if cfg.params.mu == -1:
        notes.append("energy: non-coercive (focusing sign)")

    if "blowup_detection" in cfg.checks:
        if cfg.initial.get("kind") != "ode_flat":
            raise ConfigError("checks.blowup_detection: requires ode_flat initial data")
        T_star = ode_flat_blowup_time(cfg.params, float(cfg.initial["amplitude"]))
        extra["expected_blowup_time"] = T_star
        tol_steps = _field(cfg.checks, "blowup_detection", float)
        try:
            solver.evolve(_solver_config(cfg), initial)
            checks.append(_check("blowup_detection", float("inf"), tol_steps))
        except solver.BlowupDetected as e:
            extra["detected_blowup_time"] = e.t
            checks.append(_check("blowup_detection",
                                 abs(e.t - T_star) / cfg.grid.h, tol_steps))
        if "ode_match" in cfg.checks:
            h = cfg.grid.h
            margin = 10.0  # compare while T - t >= 10 h
            n_cmp = int(np.floor((T_star - margin * h) / h))
            if n_cmp < 1:
                raise ConfigError("checks.ode_match: no lattice times before T - 10h")
            traj = solver.evolve(
                _solver_config(cfg, t_final=n_cmp * h, snapshot_stride=1), initial)
            worst = 0.0
            for s in traj.states:
                exact = reference_ode_blowup(cfg.params, T_star, s.t)
                worst = max(worst, abs(s.u[0] - exact) / exact)
            checks.append(_check("ode_match", worst,
                                 _field(cfg.checks, "ode_match", float)))
            _write(out, "step_log.csv", traj.log.to_csv())
        return checks, notes, extra

    traj = solver.evolve(_solver_config(cfg), initial)
    _write(out, "step_log.csv", traj.log.to_csv())
    _write_states(out, traj)
    log = traj.log
    if "energy_drift" in cfg.checks:
        scale = max(abs(log.energy[0]), 1e-14)
        drift = float(np.max(np.abs(log.energy - log.energy[0])) / scale)
        checks.append(_check("energy_drift", drift,
                             _field(cfg.checks, "energy_drift", float)))
    if "finite_speed" in cfg.checks:
        rho0 = log.support_radius[0]
        allowed = rho0 + (log.t - log.t[0]) + 2.0 * cfg.grid.h
        excess = float(np.max(log.support_radius - allowed))
        checks.append(_check("finite_speed", excess, 0.0))
        notes.append("finite_speed: support radius vs rho0 + t + 2h, all layers")
    if "exterior_zero" in cfg.checks:
        rho0 = log.support_radius[0]
        final = traj.states[-1]
        edge = rho0 + (final.t - log.t[0]) + 2.0 * cfg.grid.h
        outside = cfg.grid.r > edge
        val = float(np.max(np.abs(final.u[outside]))) if np.any(outside) else 0.0
        checks.append(_check("exterior_zero", val,
                             _field(cfg.checks, "exterior_zero", float)))
    return checks, notes, extra


def _run_norms(cfg: ExperimentConfig, out: Path, threads: int):
    checks, notes = [], []
    sec = cfg.section
    state = build_initial(cfg.initial, cfg.grid, cfg.params)
    betas = [float(b) for b in _field(sec, "betas", list, default=[0.0, 0.5, 1.0])]
    tail_radii = [float(x) for x in _field(sec, "tail_radii", list, default=[])]
    g1_radii = [float(x) for x in _field(sec, "g1_radii", list, default=[])]
    sp_interval = _field(sec, "sp_interval", list, default=None)

    traj = None
    if sp_interval is not None:
        if len(sp_interval) != 2:
            raise ConfigError("norms.sp_interval: expected [t0, t1]")
        traj = solver.evolve(_solver_config(cfg), state)
    report = norms.norm_report(state, traj, tail_radii=tail_radii,
                               g1_radii=g1_radii,
                               sp_interval=tuple(sp_interval) if sp_interval else None)
    _write(out, "normreport.json", report.to_json())
    if tail_radii:
        _write(out, "tails.csv", norms.tails_to_csv(norms.tail_table(state, tail_radii)))

    import warnings as _w
    if "route_agreement" in cfg.checks:
        worst = 0.0
        with _w.catch_warnings():
            _w.simplefilter("ignore")
            for b in betas:
                n1 = norms.sobolev_norm(state.u, cfg.grid, b)
                n2 = norms.sobolev_norm_1d(state.u, cfg.grid, b)
                worst = max(worst, abs(n1 - n2) / max(n2, 1e-300))
        checks.append(_check("route_agreement", worst,
                             _field(cfg.checks, "route_agreement", float)))
    if "l2_match" in cfg.checks:
        with _w.catch_warnings():
            _w.simplefilter("ignore")
            val = norms.sobolev_norm(state.u, cfg.grid, 0.0)
        direct = float(np.sqrt(4.0 * np.pi * np.trapezoid(
            state.u ** 2 * cfg.grid.r ** 2, dx=cfg.grid.h)))
        rel = abs(val - direct) / max(direct, 1e-300)
        checks.append(_check("l2_match", rel, _field(cfg.checks, "l2_match", float)))
    if "tail_monotone" in cfg.checks:
        if len(tail_radii) < 2:
            raise ConfigError("checks.tail_monotone: needs at least two tail radii")
        recs = norms.tail_table(state, sorted(tail_radii))
        worst = max(
            getattr(b, f) - getattr(a, f)
            for a, b in zip(recs, recs[1:])
            for f in ("lm_du", "lm_v", "l2_du", "l2_v"))
        checks.append(_check("tail_monotone", worst, 0.0))
    if "hardy" in cfg.checks:
        _, hardy = diagnostics.support_and_hardy(state)
        grad2 = report.energy_norms[0] ** 2
        ratio = hardy / max(4.0 * grad2, 1e-300)
        checks.append(_check("hardy", ratio, _field(cfg.checks, "hardy", float)))
    return checks, notes, {}


def _per_step_virial_residual(traj) -> float:
    """max over interior layers of |centered dz/dt - closed-form rate|."""
    z = traj.log.virial
    h = traj.grid.h
    worst = 0.0
    for k in range(1, len(traj.states) - 1):
        lhs = (z[k + 1] - z[k - 1]) / (2.0 * h)
        rate = diagnostics.virial_rate(traj.states[k])
        worst = max(worst, abs(lhs - rate))
    return worst


def _run_diagnose(cfg: ExperimentConfig, out: Path, threads: int):
    checks, notes = [], []
    sec = cfg.section
    Rc = _field(sec, "Rc", float)
    times = [float(t) for t in _field(sec, "times", list, default=[cfg.t_final / 2.0])]
    cutoffs = [float(c) for c in _field(sec, "cutoffs", list, default=[Rc])]
    h = cfg.grid.h
    for t in times:
        k = round(t / h)
        if abs(t - k * h) > 1e-9 * max(h, abs(t)):
            raise ConfigError(f"diagnose.times: {t} is not on the time lattice")
        if not (h - 1e-12 <= t <= cfg.t_final - h + 1e-12):
            raise ConfigError(
                f"diagnose.times: {t} needs both t - h and t + h inside the run")
    if cfg.params.mu == -1:
        notes.append("energy: non-coercive (focusing sign)")

    initial = build_initial(cfg.initial, cfg.grid, cfg.params)
    fine = solver.evolve(_solver_config(cfg, snapshot_stride=1), initial)
    records = [diagnostics.diagnostic_record(fine, t, Rc) for t in times]
    _write(out, "records.csv", diagnostics.records_to_csv(records, mu=cfg.params.mu))
    _write(out, "residuals.json",
           diagnostics.residual_sweep_to_json(fine, cutoffs, times))
    _write(out, "step_log.csv", fine.log.to_csv())

    need_coarse = ("virial_consistency_order" in cfg.checks
                   or "identity_order" in cfg.checks)
    coarse = None
    if need_coarse:
        if cfg.grid.n % 2 != 0:
            raise ConfigError("grid.n: refinement checks need an even node count")
        cgrid = RadialGrid(h=2.0 * cfg.grid.h, n=cfg.grid.n // 2)
        cinitial = build_initial(cfg.initial, cgrid, cfg.params)
        coarse = solver.evolve(
            solver.SolverConfig(grid=cgrid, params=cfg.params, t_final=cfg.t_final,
                                snapshot_stride=1, origin_band=cfg.origin_band,
                                linear=cfg.linear, cone_floor=cfg.cone_floor,
                                blowup_threshold=cfg.blowup_threshold), cinitial)
    if "virial_consistency_order" in cfg.checks:
        m_fine = _per_step_virial_residual(fine)
        m_coarse = _per_step_virial_residual(coarse)
        order = float(np.log2(m_coarse / m_fine))
        checks.append(_check("virial_consistency_order", order,
                             _field(cfg.checks, "virial_consistency_order", float),
                             op=">="))
    if "identity_order" in cfg.checks:
        worst = float("inf")
        for t in times:
            rf = diagnostics.localized_identity_residuals(fine, Rc, t)
            rc = diagnostics.localized_identity_residuals(coarse, Rc, t)
            for a, b in zip(rf, rc):
                worst = min(worst, float(np.log2(b / a)))
        checks.append(_check("identity_order", worst,
                             _field(cfg.checks, "identity_order", float), op=">="))
    if "z_monotone" in cfg.checks:
        val = float(np.max(np.diff(fine.log.virial)))
        checks.append(_check("z_monotone", val, 0.0, op="<"))
    if "energy_drift" in cfg.checks:
        scale = max(abs(fine.log.energy[0]), 1e-14)
        drift = float(np.max(np.abs(fine.log.energy - fine.log.energy[0])) / scale)
        checks.append(_check("energy_drift", drift,
                             _field(cfg.checks, "energy_drift", float)))
    return checks, notes, {}


def _run_bootstrap(cfg: ExperimentConfig, out: Path, threads: int):
    checks, notes = [], []
    sec = cfg.section
    p_values = [float(p) for p in _field(sec, "p_values", list,
                                         default=[5.0, 6.0, 7.0, 9.0, 13.0])]
    beta0_values = [float(b) for b in _field(sec, "beta0_values", list,
                                             default=[0.01, 0.1])]
    tol = _field(sec, "tol", float, default=1e-12)
    n_max = _field(sec, "n_max", int, default=100000)
    dense = _field(sec, "dense_sample", int, default=2000)

    lines = ["p,value,theta"]
    for p in p_values:
        value, theta = bootstrap.contraction_constant(p)
        lines.append(f"{p!r},{value!r},{theta!r}")
    _write(out, "contraction.csv", "\n".join(lines) + "\n")

    jobs = [(p, b0) for p in p_values for b0 in beta0_values]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        seqs = list(pool.map(
            lambda pb: bootstrap.exponent_iteration(pb[0], pb[1], n_max=n_max, tol=tol),
            jobs))
    for (p, b0), seq in zip(jobs, seqs):
        i, j = p_values.index(p), beta0_values.index(b0)
        body = f"# p={p!r} beta0={b0!r}\n" + seq.to_csv()
        _write(out, f"exponents_p{i}_b{j}.csv", body)

    if "contraction_subunit" in cfg.checks:
        sample = np.geomspace(5.0, 1e4, dense)
        worst = max(bootstrap.contraction_constant(p)[0] for p in sample)
        checks.append(_check("contraction_subunit", worst,
                             _field(cfg.checks, "contraction_subunit", float), op="<"))
    if "iteration_monotone" in cfg.checks:
        worst = -float("inf")
        for (p, b0), seq in zip(jobs, seqs):
            limit = 1.0 - 2.0 / (p - 1.0)
            if b0 >= limit:  # fixed point: constant sequence, exempt
                continue
            diffs = np.diff(seq.beta)
            worst = max(worst, float(np.max(-diffs)) if diffs.size else -float("inf"))
        checks.append(_check("iteration_monotone", worst, 0.0, op="<"))
    if "limit_gap" in cfg.checks:
        worst = max(seq.limit_gap for seq in seqs)
        checks.append(_check("limit_gap", worst, _field(cfg.checks, "limit_gap", float)))
    if "fixed_point" in cfg.checks:
        worst = 0.0
        for p in p_values:
            seq = bootstrap.exponent_iteration(p, 1.0 - 2.0 / (p - 1.0))
            worst = max(worst, abs(seq.gamma[0] * p - 1.0))
        checks.append(_check("fixed_point", worst,
                             _field(cfg.checks, "fixed_point", float)))
    return checks, notes, {}


def _run_verify_w(cfg: ExperimentConfig, out: Path, threads: int):
    checks, notes = [], []
    notes.append("cone guard disabled: the static profile is not compactly supported")
    notes.append("drift region: r <= R - t - 2h (outer truncation is causally excluded)")
    notes.append("energy: non-coercive (focusing sign)")
    initial = reference_W(cfg.grid)
    traj = solver.evolve(_solver_config(cfg), initial)
    _write(out, "step_log.csv", traj.log.to_csv())
    save_state(traj.states[-1], out / "final_state.txt")

    W = initial.u
    r = cfg.grid.r
    drift = 0.0
    for s in traj.states:
        clean = r <= cfg.grid.R - (s.t - initial.t) - 2.0 * cfg.grid.h
        drift = max(drift, float(np.max(np.abs(s.u[clean] - W[clean]))))
    r_min = _field(cfg.section, "decay_r_min", float, default=4.0) \
        if cfg.section else 4.0
    C0, slope = bootstrap.decay_fit(traj, r_min=r_min)

    # tail decay is a property of the profile; the evolved field carries
    # boundary-truncation garbage near R that would swamp the tail integral
    window = (r >= r_min) & (r <= cfg.grid.R / 4.0)
    radii = r[window]
    profile = traj.states[0]
    tails = np.array([norms.tail_norms(profile, rr).l2_du for rr in radii])
    pos = tails > 0
    tail_slope = float(np.polyfit(np.log(radii[pos]), np.log(tails[pos]), 1)[0])

    extra = {"report": {"static_drift": drift, "C0": C0, "slope": slope,
                        "tail_slope": tail_slope}}
    if "static_drift" in cfg.checks:
        checks.append(_check("static_drift", drift,
                             _field(cfg.checks, "static_drift", float)))
    if "decay_c0" in cfg.checks:
        rel = abs(C0 - np.sqrt(3.0)) / np.sqrt(3.0)
        checks.append(_check("decay_c0", rel, _field(cfg.checks, "decay_c0", float)))
    if "decay_slope" in cfg.checks:
        checks.append(_check("decay_slope", abs(slope - (-1.0)),
                             _field(cfg.checks, "decay_slope", float)))
    if "tail_slope" in cfg.checks:
        checks.append(_check("tail_slope", abs(tail_slope - (-0.5)),
                             _field(cfg.checks, "tail_slope", float)))
    return checks, notes, extra


def _hat_state(grid: RadialGrid, params: EquationParams) -> RadialState:
    """Piecewise-linear reduced field supported on nodes 8..40 (peak at 24)."""
    j = np.arange(grid.n + 1, dtype=float)
    w = np.maximum(0.0, 1.0 - np.abs(j - 24.0) / 16.0)
    u = np.zeros(grid.n + 1)
    u[1:] = w[1:] / grid.r[1:]
    return RadialState(grid=grid, params=params, t=0.0, u=u, v=np.zeros(grid.n + 1))


def _dalembert_final(w0: np.ndarray, n_steps: int) -> np.ndarray:
    """Exact free evolution of an odd-extended lattice profile (v0 = 0)."""
    n = len(w0) - 1

    def sample(k: np.ndarray) -> np.ndarray:
        k = np.asarray(k)
        out = np.zeros(k.shape)
        inside = np.abs(k) <= n
        ki = np.abs(k[inside]).astype(int)
        out[inside] = np.sign(k[inside]) * w0[ki]
        return out

    j = np.arange(n + 1)
    return 0.5 * (sample(j + n_steps) + sample(j - n_steps))


def _run_linear_check(cfg: ExperimentConfig, out: Path, threads: int):
    checks, notes = [], []
    params = cfg.params
    grid = cfg.grid
    n_steps = int(round(cfg.t_final / grid.h))

    hat = _hat_state(grid, params)
    traj = solver.evolve(_solver_config(cfg, linear=True,
                                        snapshot_stride=max(1, n_steps)), hat)
    w_exact = _dalembert_final(hat.w, n_steps)
    err = float(np.max(np.abs(traj.states[-1].w - w_exact)))
    checks.append(_check("dalembert_error", err,
                         _field(cfg.checks, "dalembert_error", float, default=1e-12)))

    # reversibility on a reduced grid: forward then backward through step()
    rev_steps = _field(cfg.section, "reversal_steps", int, default=256) \
        if cfg.section else 256
    small = RadialGrid(h=grid.h, n=min(grid.n, 512))
    hat_s = _hat_state(small, params)
    fwd = solver.evolve(
        solver.SolverConfig(grid=small, params=params, t_final=rev_steps * small.h,
                            snapshot_stride=1, linear=True, cone_floor=None), hat_s)
    lo, hi = fwd.states[-2], fwd.states[-1]
    cur, prev = lo, hi
    for _ in range(rev_steps - 1):
        cur, prev = solver.step(prev, cur, linear=True), cur
    rev_err = float(np.max(np.abs(cur.u - hat_s.u)))
    checks.append(_check("reversibility", rev_err,
                         _field(cfg.checks, "reversibility", float, default=1e-10)))

    # lattice traveling wave: exact transport means zero characteristic defect
    prof = np.maximum(0.0, 1.0 - np.abs(np.arange(small.n + 1) - 100.0) / 40.0)
    u0 = np.zeros(small.n + 1)
    u0[1:] = prof[1:] / small.r[1:]
    back = np.zeros(small.n + 1)
    back[:-1] = prof[1:]  # f(r + h): the wave one step earlier
    ub = np.zeros(small.n + 1)
    ub[1:] = back[1:] / small.r[1:]
    state0 = RadialState(grid=small, params=params, t=0.0, u=u0,
                         v=np.zeros(small.n + 1))
    state_back = RadialState(grid=small, params=params, t=-small.h, u=ub,
                             v=np.zeros(small.n + 1))
    twave = solver.evolve(
        solver.SolverConfig(grid=small, params=params, t_final=128.0 * small.h,
                            snapshot_stride=1, linear=True, cone_floor=None),
        state0, initial_prev=state_back)
    resid = solver.characteristic_transport_residual(
        twave, r0=40.0 * small.h, t0=64.0 * small.h, tau_max=32.0 * small.h)
    checks.append(_check("traveling_wave", resid,
                         _field(cfg.checks, "traveling_wave", float, default=1e-10)))

    _write(out, "report.json", json.dumps(
        {"dalembert_error": err, "reversibility": rev_err,
         "traveling_wave": resid}, indent=2) + "\n")
    return checks, notes, {}


_RUNNERS = {
    "evolve": _run_evolve,
    "norms": _run_norms,
    "diagnose": _run_diagnose,
    "bootstrap": _run_bootstrap,
    "verify-W": _run_verify_w,
    "linear-check": _run_linear_check,
}


def run(config: ExperimentConfig, threads: int = 1) -> int:
    """Execute a parsed config; write artifacts + manifest; 0 iff checks pass."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    checks, notes, extra = _RUNNERS[config.scenario](config, out, threads)
    walltime = time.perf_counter() - t0
    status = "pass" if all(c["pass"] for c in checks) else "fail"
    manifest = {
        "scenario": config.scenario,
        "version": __version__,
        "config": config.raw,
        "walltime_s": walltime,
        "checks": checks,
        "notes": notes,
        **extra,
        "status": status,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return 0 if status == "pass" else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlwlab",
        description="Numerical laboratory for the radial semilinear wave equation")
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        sp = sub.add_parser(name, help=f"run the {name} scenario")
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--out", default=None, help="output directory override")
        sp.add_argument("--threads", type=int, default=1,
                        help="worker threads for parameter sweeps")
    args = parser.parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as e:
        print(f"config: cannot read {args.config}: {e}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as e:
        print(f"config: invalid JSON in {args.config}: {e}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(raw, scenario=args.scenario, out_override=args.out)
    except ConfigError as e:
        print(f"config: {e}", file=sys.stderr)
        return 2
    try:
        return run(cfg, threads=args.threads)
    except solver.SolverError as e:
        print(f"solver: {e} (t = {e.t!r})", file=sys.stderr)
        return 1
    except ConfigError as e:
        print(f"config: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        # contract violations raised by the library (lattice misalignment,
        # coverage shortfalls) trace back to config values
        print(f"config: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
