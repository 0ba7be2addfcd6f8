"""The F-functional, the lambda eigenproblem, and the identity residuals.

Reduced forms on the orbit circle (measure d(eta) = e^{-f} e^{u} dy):

* F(g, f)   = int (R + |theta|^2) d(eta),  theta = d(k + f)
* dF/dt     = 2 int |Ric + (1/2) L_{theta#} g|^2 d(eta)  along the coupled
  flow (metric forward, Haar weight from the backward conjugate solve); the
  time derivative here is always taken by finite differences over trajectory
  checkpoints so the monotonicity check is a genuine two-sided identity test.
* lambda(g) = smallest eigenvalue of -4 lap_bar + B with B = 2 div(theta_0)
  - |theta_0|^2 + R, self-adjoint for the e^{u}dy inner product.  With
  theta_0 = dk and div(dk) = -R/2 the potential reduces to B = -|grad k|^2
  (checked symbolically in the test suite).
* the uniqueness energy of two flows and the differential-Harnack residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as tg
from .errors import DomainError, EigensolverError
from .flow import FlowTrajectory
from .geometry import (GroupoidMetric, HaarWeight, divergence_1form,
                       grad_norm_sq, laplace_beltrami, mean_curvature_form,
                       orbit_measure, scalar_curvature, soliton_residual)
from .grid import GridSpec, PeriodicField, TwistedField


def f_functional(g: GroupoidMetric, h: HaarWeight) -> float:
    """F = circle integral of (R + |theta|^2) against e^{-f} e^{u} dy."""
    r = scalar_curvature(g).values
    theta = mean_curvature_form(g, h).values
    theta_sq = np.exp(-2.0 * g.u.values) * theta * theta
    dens = orbit_measure(g, h)
    return tg.integrate(PeriodicField(r + theta_sq), dens, g.spec)


def _metric_at(traj: FlowTrajectory, i: int) -> GroupoidMetric:
    return GroupoidMetric(
        TwistedField(PeriodicField(traj.kps[i]), traj.holonomy),
        PeriodicField(traj.us[i]), traj.spec)


@dataclass(frozen=True)
class VariationSeries:
    """F(t), the dissipation integral, and the identity residual per checkpoint.

    ``residuals`` hold |dF/dt - rhs| at interior checkpoints (centered
    differences need both neighbours); endpoint rows carry NaN.
    """

    times: np.ndarray
    f_values: np.ndarray
    rhs_values: np.ndarray
    residuals: np.ndarray

    def interior_max(self) -> float:
        return float(np.nanmax(self.residuals))

    def monotone_violation(self, slack: float = 1e-10) -> float:
        """Largest decrease of F between consecutive checkpoints beyond slack."""
        drops = -np.diff(self.f_values) - slack * (1.0 + np.abs(self.f_values[:-1]))
        return float(max(0.0, np.max(drops)))


def f_variation_residual(traj: FlowTrajectory) -> VariationSeries:
    """Residual of dF/dt = 2 int |Ric + (1/2) L_{theta#} g|^2 d(eta).

    The trajectory must be coupled (Haar weights produced by the conjugate
    solve, or the short-horizon forward coupling).
    """
    if not traj.coupled:
        raise DomainError("f_variation_residual needs a coupled trajectory "
                          "(see with_conjugate_haar)")
    m = len(traj)
    if m < 3:
        raise DomainError("need at least three checkpoints for centered differences")
    f_vals = np.empty(m)
    rhs = np.empty(m)
    for i in range(m):
        g = _metric_at(traj, i)
        h = HaarWeight(PeriodicField(traj.fs[i]))
        f_vals[i] = f_functional(g, h)
        tens = soliton_residual(g, h)
        rhs[i] = 2.0 * tg.integrate(tens.norm_sq(), orbit_measure(g, h), g.spec)
    dfdt = np.gradient(f_vals, traj.times)
    residuals = np.abs(dfdt - rhs)
    residuals[0] = residuals[-1] = np.nan
    return VariationSeries(traj.times.copy(), f_vals, rhs, residuals)


@dataclass(frozen=True)
class LambdaResult:
    """Smallest eigenvalue of -4 lap_bar + B and its Perron ground state.

    ground_state is normalized to unit mass, int kappa^2 e^u dy = 1, and is
    strictly positive; minimizer_f = -2 ln(kappa) realizes F(g, f) = value.
    """

    value: float
    ground_state: PeriodicField
    minimizer_f: PeriodicField


def lambda_operator(g: GroupoidMetric) -> tuple[np.ndarray, np.ndarray]:
    """(dense operator of -4 lap_bar + B, quadrature weight e^u * h).

    Collocation form e^{-2u}(D2 - diag(u_y) D1): its similarity transform by
    sqrt(weight) is symmetric up to commutators [diag(e^u), D] that vanish
    spectrally for smooth u (exactly for constant u); the caller symmetrizes.
    The divergence form (e^{-u} D1)^2 is avoided deliberately: on even
    spectral grids D1 annihilates the Nyquist mode, which would hand the
    operator a spurious second kernel vector and break the Perron ground
    state.
    """
    d1, d2, _ = tg.operators(g.spec)
    uy = d1 @ g.u.values
    e2u = np.exp(-2.0 * g.u.values)
    lap = e2u[:, None] * (d2 - uy[:, None] * d1)
    # the continuum Laplacian annihilates constants; enforce it on the rows
    # (float row sums of D2 leave ~eps*n^2 noise that would otherwise floor
    # the flat-torus eigenvalue at ~1e-11)
    n = g.spec.n_nodes
    lap -= np.outer(lap @ np.ones(n), np.full(n, 1.0 / n))
    b_pot = -grad_norm_sq(g, g.k).values
    op = -4.0 * lap + np.diag(b_pot)
    weight = g.spec.h * np.exp(g.u.values)
    return op, weight


def lambda_functional(g: GroupoidMetric) -> LambdaResult:
    """Minimize F(g, .) over unit-mass Haar weights via the ground state."""
    op, weight = lambda_operator(g)
    s = np.sqrt(weight)
    sym = (s[:, None] * op) / s[None, :]
    sym = 0.5 * (sym + sym.T)
    try:
        eigvals, eigvecs = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - eigh on sym matrices
        raise EigensolverError(f"dense eigensolve failed: {exc}") from exc
    kappa = eigvecs[:, 0] / s
    norm = np.sqrt(np.sum(kappa * kappa * weight))
    kappa = kappa / norm
    if kappa[np.argmax(np.abs(kappa))] < 0:
        kappa = -kappa
    if np.min(kappa) <= 0.0:
        raise EigensolverError(
            "ground state changed sign; the discretized operator lost the "
            "Perron property (discretization bug)")
    # Evaluate lambda as the variational form int (4|grad kappa|^2 + B
    # kappa^2) e^u dy of the normalized ground state.  Unlike the raw eigh
    # eigenvalue (or any quadratic form against the dense operator, whose
    # float64 evaluation floors at eps*||A|| ~ 1e-11), the form has no
    # catastrophic cancellation: the gradient term is a sum of squares.
    d1, _, _ = tg.operators(g.spec)
    grad_term = 4.0 * np.exp(-2.0 * g.u.values) * (d1 @ kappa) ** 2
    b_pot = -grad_norm_sq(g, g.k).values
    value = float(np.sum((grad_term + b_pot * kappa * kappa) * weight))
    return LambdaResult(value, PeriodicField(kappa),
                        PeriodicField(-2.0 * np.log(kappa)))


@dataclass(frozen=True)
class LambdaSeries:
    times: np.ndarray
    values: np.ndarray
    violations: list[tuple[float, float]]  # (t, decrease beyond slack)

    @property
    def nondecreasing(self) -> bool:
        return len(self.violations) == 0


def lambda_monotonicity(traj: FlowTrajectory, slack: float = 1e-8) -> LambdaSeries:
    """lambda(g(t)) along a flow; decreases beyond slack*(1+|lambda|) are
    reported as violations."""
    m = len(traj)
    vals = np.empty(m)
    for i in range(m):
        vals[i] = lambda_functional(_metric_at(traj, i)).value
    violations = []
    for i in range(m - 1):
        drop = vals[i] - vals[i + 1]
        if drop > slack * (1.0 + abs(vals[i])):
            violations.append((float(traj.times[i + 1]), float(drop)))
    return LambdaSeries(traj.times.copy(), vals, violations)


@dataclass(frozen=True)
class EnergyBreakdown:
    """One checkpoint of the two-flow uniqueness energy; E = S + H + I."""

    t: float
    S: float
    H: float
    I: float
    E: float


def uniqueness_energy(traj_a: FlowTrajectory, traj_b: FlowTrajectory,
                      alpha_exp: float = 0.5) -> list[EnergyBreakdown]:
    """Energy E(t) = int (t^-1 |h|^2 + t^-alpha |A|^2 + |S|^2) d(eta) comparing
    two trajectories on the same grid and time grid.

    h is the metric-component difference, A the reduced Christoffel
    difference, S the curvature difference; norms are taken with respect to
    trajectory a's metric, the measure is its reference orbit measure, and
    the decay weight is 1 (compact orbit space).  Checkpoints at t = 0 are
    skipped (the t^-1 weight).
    """
    if not 0.0 < alpha_exp < 1.0:
        raise DomainError("alpha_exp must lie in (0,1)")
    if traj_a.spec != traj_b.spec:
        raise DomainError("trajectories must share the grid")
    if traj_a.holonomy != traj_b.holonomy:
        raise DomainError("trajectories must share the holonomy")
    if len(traj_a) != len(traj_b) or np.max(np.abs(traj_a.times - traj_b.times)) > 1e-9:
        raise DomainError("trajectories must share the checkpoint time grid")
    spec = traj_a.spec
    d1, _, _ = tg.operators(spec)
    out: list[EnergyBreakdown] = []
    for i in range(len(traj_a)):
        t = float(traj_a.times[i])
        if t <= 0.0:
            continue
        ka, ua = traj_a.kps[i], traj_a.us[i]
        kb, ub = traj_b.kps[i], traj_b.us[i]
        kya = d1 @ ka + traj_a.holonomy
        kyb = d1 @ kb + traj_b.holonomy
        uya = d1 @ ua
        uyb = d1 @ ub
        e2ua = np.exp(-2.0 * ua)

        h_sq = (1.0 - np.exp(2.0 * (kb - ka))) ** 2 + (1.0 - np.exp(2.0 * (ub - ua))) ** 2
        # Christoffel differences: G^x_{xy} = k_y, G^y_{yy} = u_y,
        # G^y_{xx} = -k_y e^{2(k-u)}; norms with metric a.
        gyxx_a = -kya * np.exp(2.0 * (ka - ua))
        gyxx_b = -kyb * np.exp(2.0 * (kb - ub))
        a_sq = (2.0 * e2ua * (kya - kyb) ** 2
                + np.exp(2.0 * ua - 4.0 * ka) * (gyxx_a - gyxx_b) ** 2
                + e2ua * (uya - uyb) ** 2)
        ra = -2.0 * e2ua * ((d1 @ (d1 @ ka)) + kya * kya - uya * kya)
        rb = -2.0 * np.exp(-2.0 * ub) * ((d1 @ (d1 @ kb)) + kyb * kyb - uyb * kyb)
        s_sq = (ra - rb) ** 2

        dens = PeriodicField(np.exp(ua))
        s_val = tg.integrate(PeriodicField(s_sq), dens, spec)
        h_val = tg.integrate(PeriodicField(h_sq), dens, spec) / t
        i_val = tg.integrate(PeriodicField(a_sq), dens, spec) / t**alpha_exp
        out.append(EnergyBreakdown(t, s_val, h_val, i_val, s_val + h_val + i_val))
    return out


@dataclass(frozen=True)
class HarnackSeries:
    """Residual of the differential-Harnack identity along a conjugate pair.

    residuals[i] = sup |P((R + 2 div theta - |theta|^2) v) - 2|Ric + grad
    theta|^2 v| at interior checkpoints (NaN at the ends); rhs_min is the
    pointwise minimum of the right side over the whole window (>= 0).
    """

    times: np.ndarray
    residuals: np.ndarray
    rhs_min: float

    def interior_max(self) -> float:
        return float(np.nanmax(self.residuals))


def harnack_residual(traj: FlowTrajectory,
                     v_series: list[tuple[float, PeriodicField]],
                     eval_mode_cap: int | None = None) -> HarnackSeries:
    """Evaluate both sides of the Harnack identity for v from the backward
    conjugate solve.

    P = d/dt + lap_g - 2 <theta_0, grad .> - (div theta_0 - |theta_0|^2 +
    beta_0 + R) annihilates v by construction; applied to H v with H = R +
    2 div(theta) - |theta|^2 it must equal 2 |Ric + grad theta|^2 v >= 0.
    The time derivative uses centered differences over the checkpoints.

    Both sides are projected onto the resolved Fourier band before the
    comparison: the assembly applies two more derivatives on top of the two
    inside H, so the solver's per-mode roundoff floor (~1e-15) enters scaled
    by (2 pi m)^4 and would otherwise drown the O(dt^2) residual.  The band
    defaults to the dealiasing cutoff; pass ``eval_mode_cap`` to restrict to
    the modes the scenario actually populates.
    """
    m = len(traj)
    if len(v_series) != m:
        raise DomainError("v_series must match the trajectory checkpoints")
    times = np.array([t for t, _ in v_series])
    if np.max(np.abs(times - traj.times)) > 1e-9 * (1.0 + np.max(np.abs(times))):
        raise DomainError("v_series times must match the trajectory")
    vs = np.vstack([v.values for _, v in v_series])
    if np.min(vs) <= 0.0:
        raise DomainError("v_series must be strictly positive")

    spec = traj.spec
    d1, _, filt = tg.operators(spec)
    big = np.empty_like(vs)          # (H v)(t_i, y_j)
    rhs = np.empty_like(vs)
    coeff = np.empty_like(vs)        # div theta_0 - |theta_0|^2 + beta_0 + R
    e2u_all = np.exp(-2.0 * traj.us)
    for i in range(m):
        g = _metric_at(traj, i)
        f_i = -np.log(vs[i])
        h_i = HaarWeight(PeriodicField(f_i))
        theta = mean_curvature_form(g, h_i)
        e2u = e2u_all[i]
        h_big = (scalar_curvature(g).values
                 + 2.0 * divergence_1form(g, theta).values
                 - e2u * theta.values**2)
        big[i] = h_big * vs[i]
        tens = soliton_residual(g, h_i)
        rhs[i] = 2.0 * tens.norm_sq().values * vs[i]
        psi = laplace_beltrami(g, g.k, "total_space").values
        ky = d1 @ traj.kps[i] + traj.holonomy
        gk2 = e2u * ky * ky
        r_val = -2.0 * psi
        coeff[i] = psi - gk2 + psi + r_val

    rhs_min = float(np.min(rhs))  # before projection: exactly a square times v
    proj = None
    if eval_mode_cap is not None:
        proj = tg.mode_filter(spec, eval_mode_cap)
    elif filt is not None:
        proj = filt
    if proj is not None:
        big = big @ proj.T
        rhs = rhs @ proj.T

    dbig_dt = np.gradient(big, traj.times, axis=0)
    residuals = np.full(m, np.nan)
    for i in range(1, m - 1):
        g = _metric_at(traj, i)
        bfield = PeriodicField(big[i])
        lap_big = laplace_beltrami(g, bfield, "total_space").values
        ky = d1 @ traj.kps[i] + traj.holonomy
        grad_pair = e2u_all[i] * ky * (d1 @ big[i])
        p_big = dbig_dt[i] + lap_big - 2.0 * grad_pair - coeff[i] * big[i]
        residuals[i] = float(np.max(np.abs(p_big - rhs[i])))
    return HarnackSeries(traj.times.copy(), residuals, rhs_min)
