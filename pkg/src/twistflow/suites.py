"""Scenario runner: build initial data, execute the requested verification
suites in dependency order, and assemble a RunReport.

Suite failures are recorded in the report rather than raised; the CLI maps
the aggregate outcome to its exit code.
"""

from __future__ import annotations

import logging
import time

import numpy as np

from . import analysis as an
from . import config as cf
from . import flow as fl
from . import functionals as fn
from . import geometry as geo
from . import grid as tg
from .errors import DomainError, TwistflowError
from .grid import GridSpec, PeriodicField, TwistedField
from .report import RunReport, SuiteResult

log = logging.getLogger("twistflow")

# flow-level suites run before the functional identities they feed
SUITE_ORDER = ("steady_classify", "blowdown", "max_principle", "lambda",
               "monotonicity", "harnack", "uniqueness")


def _field_from_modes(modes, const, spec: GridSpec) -> PeriodicField:
    y = spec.nodes
    out = np.full(spec.n_nodes, float(const))
    for mode, cos_amp, sin_amp in modes:
        w = 2.0 * np.pi * int(mode) * y
        out += float(cos_amp) * np.cos(w) + float(sin_amp) * np.sin(w)
    return PeriodicField(out)


def initial_state(cfg: cf.ScenarioConfig) -> fl.FlowState:
    spec = GridSpec(cfg.grid.n_nodes, cfg.grid.scheme)
    ini = cfg.initial
    k = TwistedField(_field_from_modes(ini.k_modes, ini.k_const, spec), ini.holonomy)
    u = _field_from_modes(ini.u_modes, ini.u_const, spec)
    f = _field_from_modes(ini.f_modes, ini.f_const, spec)
    return fl.FlowState(0.0, geo.GroupoidMetric(k, u, spec), geo.HaarWeight(f))


def _flow_controls(cfg: cf.ScenarioConfig, **overrides) -> fl.FlowControls:
    base = dict(c_cfl=cfg.flow.c_cfl,
                checkpoint_interval=cfg.flow.checkpoint_interval,
                coupled=cfg.flow.coupled,
                blow_up_threshold=cfg.flow.blow_up_threshold,
                dt_fixed=cfg.flow.dt_fixed)
    base.update(overrides)
    return fl.FlowControls(**base)


def suite_steady_classify(cfg, state, _shared) -> SuiteResult:
    p = cfg.params.steady_classify
    out = an.classify_steady(state.metric, state.haar, p.tol * cfg.tolerance_scale)
    expected = p.expected
    passed = expected is None or out.kind.value == expected
    return SuiteResult(
        name="steady_classify", passed=passed,
        residuals={"sup_r": out.sup_r, "sup_cusp_residual": out.sup_cusp_residual,
                   "soliton_sup": out.soliton_sup},
        checks={"kind": out.kind.value,
                "expected": "unconstrained" if expected is None else expected},
        worst=None if passed else {"what": "classification",
                                   "got": out.kind.value, "expected": expected},
        notes=f"classified as {out.kind.value}")


def suite_blowdown(cfg, state, shared) -> SuiteResult:
    p = cfg.params.blowdown
    scale = cfg.tolerance_scale
    traj = shared["main_traj"]
    bd = fl.blowdown_diagnostics(traj)
    series = np.column_stack((bd.times, bd.t_min_grad_sq, bd.t_max_grad_sq,
                              bd.t2_max_h, bd.t_max_abs_r))
    cols = ["t", "t_min_grad_sq", "t_max_grad_sq", "t2_max_h", "t_max_abs_r"]
    lam = traj.holonomy
    final_state = traj.state(-1)
    t_end = float(traj.times[-1])
    r_field = geo.scalar_curvature(final_state.metric).values * t_end
    if lam == 0.0:
        tol = p.zero_tol * scale
        worst_val = float(max(bd.t_max_grad_sq.max(), bd.t2_max_h.max(),
                              bd.t_max_abs_r.max()))
        passed = worst_val <= tol
        return SuiteResult(
            name="blowdown", passed=passed,
            residuals={"max_rescaled_series": worst_val},
            checks={"zero_twist_series_vanish": passed},
            series_columns=cols, series=series,
            worst=None if passed else {"what": "rescaled series",
                                       "value": worst_val, "bound": tol},
            notes="zero holonomy: rescaled gradient series must vanish")
    lo, hi = p.grad_band
    gmin, gmax = float(bd.t_min_grad_sq[-1]), float(bd.t_max_grad_sq[-1])
    h_fin = float(bd.t2_max_h[-1])
    checks = {
        "grad_band": bool(lo <= gmin and gmax <= hi),
        "h_cap": bool(h_fin <= p.h_cap * scale),
        "r_band": bool(p.r_band[0] <= r_field.min() and r_field.max() <= p.r_band[1]),
    }
    passed = all(checks.values())
    worst = None
    if not passed:
        worst = {"t": t_end, "t_min_grad_sq": gmin, "t_max_grad_sq": gmax,
                 "t2_max_h": h_fin, "t_r_min": float(r_field.min()),
                 "t_r_max": float(r_field.max())}
    return SuiteResult(
        name="blowdown", passed=passed,
        residuals={"t_min_grad_sq_final": gmin, "t_max_grad_sq_final": gmax,
                   "t2_max_h_final": h_fin,
                   "t_r_min_final": float(r_field.min()),
                   "t_r_max_final": float(r_field.max())},
        checks=checks, series_columns=cols, series=series, worst=worst)


def suite_max_principle(cfg, state, shared) -> SuiteResult:
    p = cfg.params.max_principle
    traj = shared["main_traj"]
    gk2 = geo.grad_norm_sq(state.metric, state.metric.k).values
    alpha, beta = float(gk2.min()), float(gk2.max())
    cols = ["t", "min_grad_sq", "max_grad_sq", "max_h", "t_max_r"]
    if alpha <= 0.0:
        return SuiteResult(
            name="max_principle", passed=True,
            residuals={"initial_min_grad_sq": alpha},
            checks={"applicable": False},
            notes="initial |grad k|^2 reaches 0: outside the strict pinching "
                  "hypothesis, bounds not asserted")
    rep = fl.max_principle_monitor(traj, alpha, beta, fit_horizon=p.fit_horizon,
                                   slack=p.slack * cfg.tolerance_scale)
    if not rep.applicable:
        return SuiteResult(
            name="max_principle", passed=True,
            residuals={"alpha": alpha, "beta": beta},
            checks={"applicable": False},
            series_columns=cols, series=rep.series, notes=rep.note)
    passed = rep.ok
    worst = None
    if rep.bound_violations:
        t_bad, name, margin = max(rep.bound_violations, key=lambda v: v[2])
        worst = {"t": t_bad, "bound": name, "margin": margin}
    return SuiteResult(
        name="max_principle", passed=passed,
        residuals={"alpha": alpha, "beta": beta, "fitted_c": rep.fitted_c,
                   "n_violations": float(len(rep.bound_violations))},
        checks={"applicable": True, "no_violations": passed},
        series_columns=cols, series=rep.series, worst=worst)


def suite_monotonicity(cfg, state, _shared) -> SuiteResult:
    p = cfg.params.monotonicity
    t1, t2 = p.window
    traj = fl.evolve(state, t2, _flow_controls(cfg, checkpoint_interval=p.fd_interval,
                                               coupled=False, dt_fixed=None))
    coupled = fl.with_conjugate_haar(traj, t_start=t1)
    vs = fn.f_variation_residual(coupled)
    tol = p.tolerance * cfg.tolerance_scale
    res = vs.interior_max()
    mono = vs.monotone_violation()
    checks = {"identity_residual": bool(res <= tol),
              "f_nondecreasing": bool(mono == 0.0)}
    passed = all(checks.values())
    series = np.column_stack((vs.times, vs.f_values, vs.rhs_values, vs.residuals))
    worst = None
    if not passed:
        i = int(np.nanargmax(vs.residuals))
        worst = {"t": float(vs.times[i]), "residual": float(vs.residuals[i]),
                 "bound": tol, "monotonicity_violation": mono}
    return SuiteResult(
        name="monotonicity", passed=passed,
        residuals={"identity_residual": res, "monotonicity_violation": mono,
                   "f_initial": float(vs.f_values[0]),
                   "f_final": float(vs.f_values[-1])},
        checks=checks, series_columns=["t", "F", "rhs_integral", "residual"],
        series=series, worst=worst)


def suite_lambda(cfg, state, _shared) -> SuiteResult:
    p = cfg.params.lam
    scale = cfg.tolerance_scale
    traj = fl.evolve(state, p.t_end, _flow_controls(cfg, checkpoint_interval=p.interval,
                                                    coupled=False, dt_fixed=None))
    series = fn.lambda_monotonicity(traj, slack=p.slack * scale)
    lam0 = fn.lambda_functional(state.metric)
    rng = np.random.default_rng(cfg.seed)
    worst_margin = np.inf
    for _ in range(p.n_random_weights):
        f = tg.random_band_limited(rng, state.spec, amplitude=0.8)
        shift = np.log(geo.total_mass(state.metric, geo.HaarWeight(f)))
        h = geo.HaarWeight(PeriodicField(f.values + shift))
        margin = fn.f_functional(state.metric, h) - lam0.value
        worst_margin = min(worst_margin, margin)
    checks = {
        "nondecreasing": series.nondecreasing,
        "ground_state_positive": bool(np.min(lam0.ground_state.values) > 0.0),
        "rayleigh_bound": bool(worst_margin >= -p.rayleigh_slack * scale),
    }
    passed = all(checks.values())
    worst = None
    if series.violations:
        t_bad, drop = max(series.violations, key=lambda v: v[1])
        worst = {"t": t_bad, "lambda_drop": drop}
    elif not passed:
        worst = {"what": "rayleigh bound", "margin": float(worst_margin)}
    return SuiteResult(
        name="lambda", passed=passed,
        residuals={"lambda_initial": float(series.values[0]),
                   "lambda_final": float(series.values[-1]),
                   "rayleigh_worst_margin": float(worst_margin)},
        checks=checks, series_columns=["t", "lambda"],
        series=np.column_stack((series.times, series.values)), worst=worst)


def suite_harnack(cfg, state, _shared) -> SuiteResult:
    p = cfg.params.harnack
    t1, t2 = p.window
    traj = fl.evolve(state, t2, _flow_controls(cfg, checkpoint_interval=p.fd_interval,
                                               coupled=False, dt_fixed=None))
    win = traj.window(t1, t2)
    v_end = PeriodicField(np.exp(-win.fs[-1]))
    vser = fl.backward_conjugate_solve(traj, v_end, t1, t2)
    hs = fn.harnack_residual(win, vser, eval_mode_cap=p.eval_mode_cap)
    tol = p.tolerance * cfg.tolerance_scale
    res = hs.interior_max()
    checks = {"identity_residual": bool(res <= tol),
              "rhs_nonnegative": bool(hs.rhs_min >= 0.0)}
    passed = all(checks.values())
    worst = None
    if not passed:
        i = int(np.nanargmax(hs.residuals))
        worst = {"t": float(hs.times[i]), "residual": float(hs.residuals[i]),
                 "bound": tol, "rhs_min": hs.rhs_min}
    return SuiteResult(
        name="harnack", passed=passed,
        residuals={"identity_residual": res, "rhs_min": hs.rhs_min},
        checks=checks, series_columns=["t", "residual"],
        series=np.column_stack((hs.times, hs.residuals)), worst=worst)


def _perturbed(state: fl.FlowState, amplitude: float) -> fl.FlowState:
    spec = state.spec
    bump = amplitude * np.sin(4.0 * np.pi * spec.nodes)
    k = TwistedField(PeriodicField(state.metric.k.periodic_part.values + bump),
                     state.metric.holonomy)
    return fl.FlowState(state.t, geo.GroupoidMetric(k, state.metric.u, spec),
                        state.haar)


def suite_uniqueness(cfg, state, _shared) -> SuiteResult:
    p = cfg.params.uniqueness
    scale = cfg.tolerance_scale
    dt0 = 0.45 * fl.stability_limit(state, cfg.flow.c_cfl)
    ctl = dict(checkpoint_interval=p.interval, coupled=False)
    run = lambda st, dt: fl.evolve(st, p.t_end, _flow_controls(cfg, dt_fixed=dt, **ctl))
    traj_a = run(state, dt0)
    traj_b = run(state, dt0 / 2.0)
    ident = fn.uniqueness_energy(traj_a, traj_b, p.alpha_exp)
    ident_max = max(b.E for b in ident)

    pert = _perturbed(state, p.perturbation)
    traj_c = run(pert, dt0)
    traj_d = run(pert, dt0 / 2.0)
    grown = fn.uniqueness_energy(traj_a, traj_c, p.alpha_exp)
    grown_fine = fn.uniqueness_energy(traj_b, traj_d, p.alpha_exp)

    def log_slope(breakdown):
        ts = np.array([b.t for b in breakdown])
        es = np.array([max(b.E, 1e-300) for b in breakdown])
        return float(np.polyfit(ts, np.log(es), 1)[0])

    slope = log_slope(grown)
    slope_fine = log_slope(grown_fine)
    checks = {
        "identical_data_energy": bool(ident_max <= p.identical_tol * scale),
        "log_slope_finite": bool(abs(slope) <= p.max_log_slope),
        "log_slope_stable": bool(abs(slope - slope_fine)
                                 <= p.slope_stability * (1.0 + abs(slope))),
    }
    passed = all(checks.values())
    series = np.array([[b.t, b.S, b.H, b.I, b.E] for b in grown])
    worst = None
    if not passed:
        worst = {"identical_E_max": ident_max, "slope": slope,
                 "slope_refined": slope_fine}
    return SuiteResult(
        name="uniqueness", passed=passed,
        residuals={"identical_E_max": ident_max, "log_slope": slope,
                   "log_slope_refined": slope_fine},
        checks=checks, series_columns=["t", "S", "H", "I", "E"],
        series=series, worst=worst)


_SUITE_FUNCS = {
    "steady_classify": suite_steady_classify,
    "blowdown": suite_blowdown,
    "max_principle": suite_max_principle,
    "monotonicity": suite_monotonicity,
    "lambda": suite_lambda,
    "harnack": suite_harnack,
    "uniqueness": suite_uniqueness,
}


def run_scenario(cfg: cf.ScenarioConfig) -> tuple[RunReport, dict]:
    """Execute the scenario; returns (report, shared state with trajectories).

    Suite errors become failed SuiteResults; config errors raise before any
    work starts.
    """
    cf.validate(cfg)
    state = initial_state(cfg)
    shared: dict = {"state": state}
    ordered = [s for s in SUITE_ORDER if s in cfg.suites]
    timing: dict = {}
    steps: dict = {}

    if any(s in ("blowdown", "max_principle") for s in ordered):
        t0 = time.perf_counter()
        shared["main_traj"] = fl.evolve(state, cfg.flow.t_end, _flow_controls(cfg))
        timing["main_flow_s"] = time.perf_counter() - t0
        steps["main_flow_steps"] = shared["main_traj"].total_steps()
        steps["main_flow_checkpoints"] = len(shared["main_traj"])

    results = []
    for name in ordered:
        t0 = time.perf_counter()
        try:
            results.append(_SUITE_FUNCS[name](cfg, state, shared))
        except TwistflowError as exc:
            log.warning("suite %s failed with %s", name, exc)
            results.append(SuiteResult(name=name, passed=False,
                                       notes=f"{type(exc).__name__}: {exc}"))
        timing[f"suite_{name}_s"] = time.perf_counter() - t0

    report = RunReport(config=cf.to_dict(cfg), suites=results,
                       steps=steps, timing=timing)
    return report, shared
