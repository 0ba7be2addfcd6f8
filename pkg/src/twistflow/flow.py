"""Time integration of the reduced flow and its conjugate backward solve.

The metric evolves by du/dt = dk/dt = lap_bar k + |grad k|^2 (the holonomy of
k never changes: the right-hand side is periodic).  Time stepping is explicit
classic RK4 limited by dt <= c_cfl * h^2 * min(e^{2u}) with c_cfl = 0.4; the
spectral backend dealiases the right-hand side (2/3 rule), which is what
makes that limit stable for Fourier collocation.

The coupled option additionally advances the Haar weight f by its forward
equation.  That equation is a backward heat equation run forward and is
therefore ill-posed; it is kept for short-horizon, band-limited experiments
only.  The production route for a coupled pair is the one used by the
monotonicity results: evolve the metric forward, then solve the conjugate
equation backward (``backward_conjugate_solve`` / ``with_conjugate_haar``).

In reversed time tau = t_end - t the conjugate equation

    dv/dt = -lap_bar v + <grad v, theta_0> + Lambda v,   Lambda = -|grad k|^2

is a well-posed diffusion-advection-reaction problem; coefficients between
checkpoints are interpolated linearly in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import grid as tg
from . import _kernels as kern
from .errors import (BlowUpError, DomainError, PositivityLossError,
                     StabilityError, StagnationError)
from .geometry import GroupoidMetric, HaarWeight, scalar_curvature, grad_norm_sq, \
    laplace_beltrami
from .grid import GridSpec, PeriodicField, TwistedField

DEFAULT_C_CFL = 0.4
DEFAULT_BLOWUP_THRESHOLD = 1e8


@dataclass(frozen=True)
class FlowState:
    """Snapshot (t, metric, Haar weight) of the coupled system."""

    t: float
    metric: GroupoidMetric
    haar: HaarWeight

    def __post_init__(self):
        if self.t < 0.0:
            raise DomainError("flow time must be nonnegative")
        if self.haar.n != self.metric.spec.n_nodes:
            raise DomainError("Haar weight must share the metric grid")

    @property
    def spec(self) -> GridSpec:
        return self.metric.spec


@dataclass(frozen=True)
class FlowControls:
    """Policy knobs for ``evolve``."""

    c_cfl: float = DEFAULT_C_CFL
    safety: float = 1.0           # fraction of the documented limit used by the policy
    checkpoint_interval: float = 0.1
    coupled: bool = False
    coupled_mode_cap: int = 8     # rhs band limit for the ill-posed coupled option
    blow_up_threshold: float = DEFAULT_BLOWUP_THRESHOLD
    dt_fixed: float | None = None  # exact step for Richardson studies
    dt_floor: float = 1e-13


@dataclass(frozen=True)
class IntervalLog:
    """Stepping record for one checkpoint interval (dt is constant inside)."""

    t_end: float
    n_steps: int
    dt: float


@dataclass
class FlowTrajectory:
    """Checkpointed time series of the flow.

    Checkpoints are stored as dense arrays (times, k_per, u, f rows); the
    ``state(i)`` accessor materializes a FlowState.  ``coupled`` marks
    trajectories whose Haar weights satisfy the conjugate-flow coupling (set
    by coupled forward evolution or by ``with_conjugate_haar``).
    """

    spec: GridSpec
    holonomy: float
    times: np.ndarray
    kps: np.ndarray
    us: np.ndarray
    fs: np.ndarray
    step_log: list[IntervalLog] = field(default_factory=list)
    coupled: bool = False
    coupled_source: str | None = None

    def __len__(self) -> int:
        return self.times.shape[0]

    def state(self, i: int) -> FlowState:
        i = int(np.arange(len(self))[i])  # normalize negative indices
        metric = GroupoidMetric(
            TwistedField(PeriodicField(self.kps[i]), self.holonomy),
            PeriodicField(self.us[i]), self.spec)
        return FlowState(float(self.times[i]), metric, HaarWeight(PeriodicField(self.fs[i])))

    @property
    def checkpoints(self) -> list[FlowState]:
        return [self.state(i) for i in range(len(self))]

    def index_at(self, t: float) -> int:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * (1.0 + abs(t)):
            raise DomainError(f"no checkpoint at t={t}")
        return i

    def window(self, t_lo: float, t_hi: float) -> "FlowTrajectory":
        sel = (self.times >= t_lo - 1e-12) & (self.times <= t_hi + 1e-12)
        return FlowTrajectory(self.spec, self.holonomy, self.times[sel],
                              self.kps[sel], self.us[sel], self.fs[sel],
                              self.step_log, self.coupled, self.coupled_source)

    def total_steps(self) -> int:
        return int(sum(rec.n_steps for rec in self.step_log))


@dataclass(frozen=True)
class MonitorReport:
    """Sampled gradient/mean-curvature envelopes and any bound violations.

    ``series`` rows are (t, min|grad k|^2, max|grad k|^2, max H, t*max R).
    ``applicable`` is False when the initial data sits outside the pinching
    hypothesis (constant |grad k|^2), in which case no bounds are asserted.
    """

    series: np.ndarray
    bound_violations: list[tuple[float, str, float]]
    applicable: bool
    alpha: float
    beta: float
    fitted_c: float
    note: str = ""

    @property
    def ok(self) -> bool:
        return len(self.bound_violations) == 0


@lru_cache(maxsize=None)
def _conv_kernels(spec: GridSpec):
    """Circulant convolution kernels (D1, D2, filter) for the fast steppers."""
    d1, d2, filt = tg.operators(spec)
    r1 = kern.circulant_kernel(d1)
    r2 = kern.circulant_kernel(d2)
    use_filter = filt is not None
    rf = kern.circulant_kernel(filt) if use_filter else np.zeros(2)
    return r1, r2, rf, use_filter


def stability_limit(state: FlowState, c_cfl: float = DEFAULT_C_CFL) -> float:
    """dt limit c_cfl * h^2 * min(e^{2u}) for explicit stepping."""
    h = state.spec.h
    return c_cfl * h * h * float(np.exp(2.0 * np.min(state.metric.u.values)))


def ricci_rhs(g: GroupoidMetric) -> tuple[PeriodicField, PeriodicField]:
    """(dk_per/dt, du/dt); both equal lap_bar k + |grad k|^2."""
    psi = laplace_beltrami(g, g.k).values + grad_norm_sq(g, g.k).values
    return PeriodicField(psi), PeriodicField(psi)


def _stepping_rhs(spec: GridSpec, lam: float, kp, u, f, coupled: bool,
                  coupled_mode_cap: int = 8):
    """Dealiased rhs used by the steppers (filter = stability device; the
    coupled f-equation gets the tighter band limit its backward-heat growth
    requires)."""
    d1, d2, filt = tg.operators(spec)
    ky = d1 @ kp + lam
    kyy = d2 @ kp
    uy = d1 @ u
    e2u = np.exp(-2.0 * u)
    psi = e2u * (kyy + ky * (ky - uy))
    if filt is not None:
        psi = filt @ psi
    psi_f = np.zeros_like(psi)
    if coupled:
        if spec.scheme != "spectral":
            raise DomainError("the forward-coupled option needs the spectral scheme")
        fy = d1 @ f
        fyy = d2 @ f
        psi_f = e2u * (-fyy + uy * fy + ky * ky + ky * fy + fy * fy)
        cap = min(coupled_mode_cap, int(spec.n_nodes * tg.DEALIAS_FRACTION))
        psi_f = tg.mode_filter(spec, cap) @ psi_f
    return psi, psi_f


def step(state: FlowState, dt: float, coupled: bool = False,
         c_cfl: float = DEFAULT_C_CFL) -> FlowState:
    """One explicit RK4 step of the (optionally coupled) system."""
    if dt <= 0.0:
        raise DomainError("dt must be positive")
    limit = stability_limit(state, c_cfl)
    if dt > limit * (1.0 + 1e-9):
        raise StabilityError(
            f"dt={dt:.3e} exceeds stability limit {limit:.3e} "
            f"(= {c_cfl} * h^2 * min(e^(2u)))")
    spec = state.spec
    lam = state.metric.holonomy
    kp = state.metric.k.periodic_part.values
    u = state.metric.u.values
    f = state.haar.f.values

    def rhs(kp_s, u_s, f_s):
        return _stepping_rhs(spec, lam, kp_s, u_s, f_s, coupled)

    k1, g1 = rhs(kp, u, f)
    k2, g2 = rhs(kp + 0.5 * dt * k1, u + 0.5 * dt * k1, f + 0.5 * dt * g1)
    k3, g3 = rhs(kp + 0.5 * dt * k2, u + 0.5 * dt * k2, f + 0.5 * dt * g2)
    k4, g4 = rhs(kp + dt * k3, u + dt * k3, f + dt * g3)
    dk = (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    df = (dt / 6.0) * (g1 + 2 * g2 + 2 * g3 + g4)
    kp_n, u_n, f_n = kp + dk, u + dk, f + df
    if not (np.all(np.isfinite(kp_n)) and np.all(np.isfinite(f_n))):
        raise BlowUpError("non-finite values after step", last_state=state)
    metric = GroupoidMetric(TwistedField(PeriodicField(kp_n), lam),
                            PeriodicField(u_n), spec)
    return FlowState(state.t + dt, metric, HaarWeight(PeriodicField(f_n)))


def _checkpoint_times(t0: float, t_end: float, interval: float) -> np.ndarray:
    n_ck = int(np.ceil((t_end - t0) / interval - 1e-9))
    times = t0 + interval * np.arange(1, n_ck + 1)
    times[-1] = t_end
    return times


def evolve(initial: FlowState, t_end: float, controls: FlowControls = FlowControls()) -> FlowTrajectory:
    """Integrate the flow from ``initial`` to ``t_end`` with checkpointing.

    Raises BlowUpError (carrying the partial trajectory) if the curvature
    guard trips, StagnationError if the step size underflows, StabilityError
    if a fixed step violates the stability precondition.
    """
    if t_end <= initial.t:
        raise DomainError("t_end must exceed the initial time")
    spec = initial.spec
    if controls.coupled and spec.scheme != "spectral":
        raise DomainError("the forward-coupled option needs the spectral scheme "
                          "(its ill-posed f-equation requires a mode filter)")
    d1, _, _ = tg.operators(spec)
    r1, r2, rf, use_filter = _conv_kernels(spec)
    if controls.coupled:
        cap = min(controls.coupled_mode_cap, int(spec.n_nodes * tg.DEALIAS_FRACTION))
        rf_f = kern.circulant_kernel(tg.mode_filter(spec, cap))
    else:
        rf_f = np.zeros(2)

    kp0 = initial.metric.k.periodic_part.values.copy()
    u0 = initial.metric.u.values.copy()
    f0 = initial.haar.f.values.copy()
    w0 = u0 - kp0
    w0y = d1 @ w0
    lam = initial.metric.holonomy

    ckpt = _checkpoint_times(initial.t, t_end, controls.checkpoint_interval)
    dt_fixed = -1.0 if controls.dt_fixed is None else float(controls.dt_fixed)

    status, reached, kps, fs, steps, dts, kp_last, f_last, t_last = kern.ricci_forward_kernel(
        kp0, f0, w0, w0y, lam, r1, r2, rf, rf_f, use_filter, controls.coupled,
        spec.h, controls.c_cfl, controls.safety, dt_fixed, initial.t, ckpt,
        controls.blow_up_threshold, controls.dt_floor)

    times = np.concatenate(([initial.t], ckpt[:reached]))
    kps_full = np.vstack(([kp0], kps[:reached]))
    fs_full = np.vstack(([f0], fs[:reached]))
    us_full = kps_full + w0[None, :]
    log = [IntervalLog(float(ckpt[i]), int(steps[i]), float(dts[i])) for i in range(reached)]
    traj = FlowTrajectory(spec, lam, times, kps_full, us_full, fs_full, log,
                          coupled=controls.coupled,
                          coupled_source="forward_coupled" if controls.coupled else None)

    if status == kern.STATUS_BLOWUP:
        metric = GroupoidMetric(TwistedField(PeriodicField(kp_last), lam),
                                PeriodicField(kp_last + w0), spec)
        last = FlowState(float(t_last), metric, HaarWeight(PeriodicField(f_last)))
        raise BlowUpError(f"curvature blow-up detected at t={t_last:.6g}",
                          partial=traj, last_state=last)
    if status == kern.STATUS_STAGNATION:
        raise StagnationError(f"time step underflow at t={t_last:.6g}")
    if status == kern.STATUS_UNSTABLE_DT:
        raise StabilityError("fixed dt exceeds the stability limit along the run")
    return traj


def backward_conjugate_solve(traj: FlowTrajectory, v_end: PeriodicField,
                             t_start: float | None = None,
                             t_end: float | None = None,
                             c_cfl: float = DEFAULT_C_CFL,
                             safety: float = 1.0) -> list[tuple[float, PeriodicField]]:
    """Solve the conjugate equation backward from t_end along the trajectory.

    Returns (t, v) pairs at the trajectory checkpoints inside [t_start,
    t_end], ascending in t; v stays strictly positive or the solve aborts
    with PositivityLossError (the reversed-time problem is well-posed, so a
    positivity loss signals too large a step).
    """
    if np.any(v_end.values <= 0.0):
        raise DomainError("v_end must be strictly positive")
    lo = traj.times[0] if t_start is None else t_start
    hi = traj.times[-1] if t_end is None else t_end
    sub = traj.window(lo, hi)
    if len(sub) < 2:
        raise DomainError("backward solve needs at least two checkpoints")
    spec = sub.spec
    d1, _, _ = tg.operators(spec)
    r1, r2, rf, use_filter = _conv_kernels(spec)

    ky_ck = np.ascontiguousarray(sub.kps @ d1.T + sub.holonomy)
    uy_ck = np.ascontiguousarray(sub.us @ d1.T)
    us_ck = np.ascontiguousarray(sub.us)
    status, solved_to, vs = kern.conjugate_backward_kernel(
        v_end.values.copy(), sub.times, us_ck, ky_ck, uy_ck, r1, r2, rf,
        use_filter, spec.h, c_cfl, safety, 1e-13)
    if status == kern.STATUS_POSITIVITY:
        raise PositivityLossError(
            f"positivity lost near t={sub.times[max(solved_to - 1, 0)]:.6g}; "
            "reduce the step size")
    if status == kern.STATUS_STAGNATION:
        raise StagnationError("backward solve time step underflow")
    return [(float(sub.times[i]), PeriodicField(vs[i])) for i in range(len(sub))]


def with_conjugate_haar(traj: FlowTrajectory, v_end: PeriodicField | None = None,
                        t_start: float | None = None,
                        t_end: float | None = None) -> FlowTrajectory:
    """Coupled trajectory on [t_start, t_end]: Haar weights f = -ln v from the
    backward conjugate solve (the construction behind the monotonicity results)."""
    lo = traj.times[0] if t_start is None else t_start
    hi = traj.times[-1] if t_end is None else t_end
    sub = traj.window(lo, hi)
    if v_end is None:
        v_end = PeriodicField(np.exp(-sub.fs[-1]))
    series = backward_conjugate_solve(traj, v_end, lo, hi)
    fs = np.vstack([-np.log(v.values) for _, v in series])
    return FlowTrajectory(sub.spec, sub.holonomy, sub.times, sub.kps, sub.us,
                          fs, sub.step_log, coupled=True,
                          coupled_source="backward_conjugate")


def _gradient_stats(traj: FlowTrajectory):
    """(min|grad k|^2, max|grad k|^2, max H, max R, min R) per checkpoint."""
    d1, d2, _ = tg.operators(traj.spec)
    ky = traj.kps @ d1.T + traj.holonomy
    kyy = traj.kps @ d2.T
    uy = traj.us @ d1.T
    e2u = np.exp(-2.0 * traj.us)
    gk2 = e2u * ky * ky
    lap = e2u * (kyy - uy * ky)
    h_field = lap * lap
    r_field = -2.0 * (lap + gk2)
    return (gk2.min(axis=1), gk2.max(axis=1), h_field.max(axis=1),
            r_field.max(axis=1), r_field.min(axis=1))


@dataclass(frozen=True)
class BlowdownSeries:
    """Rescaled invariants of g_hat(t) = g(t)/t along a trajectory."""

    times: np.ndarray
    t_min_grad_sq: np.ndarray   # t * min|grad k|^2  ( = min|grad k_hat|^2 )
    t_max_grad_sq: np.ndarray
    t2_max_h: np.ndarray        # t^2 * max H        ( = max H_hat )
    t_max_abs_r: np.ndarray     # t * max|R|


def blowdown_diagnostics(traj: FlowTrajectory, t_min: float = 0.0) -> BlowdownSeries:
    """Series (t, t*min|grad k|^2, t*max|grad k|^2, t^2*max H, t*max|R|)."""
    sel = traj.times > max(t_min, 0.0)
    if not np.any(sel):
        raise DomainError("blowdown diagnostics need checkpoints with t > 0")
    sub = FlowTrajectory(traj.spec, traj.holonomy, traj.times[sel],
                         traj.kps[sel], traj.us[sel], traj.fs[sel])
    mn, mx, mh, rmax, rmin = _gradient_stats(sub)
    t = sub.times
    return BlowdownSeries(t, t * mn, t * mx, t * t * mh,
                          t * np.maximum(np.abs(rmax), np.abs(rmin)))


def max_principle_monitor(traj: FlowTrajectory, alpha: float, beta: float,
                          fit_horizon: float = 1.0,
                          slack: float = 1e-6) -> MonitorReport:
    """Check the pinching envelopes along the trajectory.

    alpha/(2 alpha t + 1) <= |grad k|^2 <= beta/(2 beta t + 1) pointwise at
    every checkpoint, and H <= C/(2 alpha t + 1)^4 with C fitted from
    checkpoints with t <= fit_horizon and enforced beyond it.  Requires
    0 < alpha <= min|grad k|^2(t0) and max|grad k|^2(t0) <= beta; initial data
    with constant |grad k|^2 is outside the pinching hypothesis and yields an
    inapplicable report instead of bound checks.

    The effective slack is ``slack*(1+beta)`` for the envelopes plus a
    spectral roundoff allowance; margins are reported as bound excess.
    """
    mn, mx, mh, rmax, _ = _gradient_stats(traj)
    t = traj.times
    mn0, mx0 = mn[0], mx[0]
    if alpha <= 0.0:
        raise DomainError("alpha must be positive (initial |grad k|^2 must be pinched away from 0)")
    tol0 = 1e-12 * (1.0 + mx0)
    if alpha > mn0 + tol0:
        raise DomainError(f"alpha={alpha} exceeds initial min |grad k|^2 = {mn0}")
    if beta < mx0 - tol0:
        raise DomainError(f"beta={beta} is below initial max |grad k|^2 = {mx0}")

    series = np.column_stack((t, mn, mx, mh, t * rmax))
    if mx0 - mn0 <= 1e-12 * (1.0 + mx0):
        return MonitorReport(series, [], applicable=False, alpha=alpha, beta=beta,
                             fitted_c=float("nan"),
                             note="initial |grad k|^2 is constant: outside the "
                                  "strict pinching hypothesis, bounds not asserted")

    eps_grid = 1e-12 * (np.pi * traj.spec.n_nodes) ** 2
    tol = slack * (1.0 + beta) + eps_grid
    lower = alpha / (2.0 * alpha * t + 1.0)
    upper = beta / (2.0 * beta * t + 1.0)
    violations: list[tuple[float, str, float]] = []
    for i in range(len(t)):
        if mn[i] < lower[i] - tol:
            violations.append((float(t[i]), "grad_lower", float(lower[i] - mn[i])))
        if mx[i] > upper[i] + tol:
            violations.append((float(t[i]), "grad_upper", float(mx[i] - upper[i])))

    early = t <= fit_horizon + 1e-12
    envelope = (2.0 * alpha * t + 1.0) ** 4
    fitted_c = float(np.max(mh[early] * envelope[early])) if np.any(early) else float(np.max(mh * envelope))
    tol_h = slack * (1.0 + fitted_c)
    for i in range(len(t)):
        if t[i] > fit_horizon:
            bound = fitted_c / envelope[i]
            if mh[i] > bound + tol_h:
                violations.append((float(t[i]), "h_bound", float(mh[i] - bound)))
    return MonitorReport(series, violations, applicable=True, alpha=alpha,
                         beta=beta, fitted_c=fitted_c)
