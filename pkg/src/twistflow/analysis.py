"""Steady states: the constant-curvature profile ODE and classification.

Constant scalar curvature c for the invariant surface metric reduces, in the
arc-length coordinate s on a circle of length L, to

    k'' + (k')^2 = -c/2,     k(s + L) = k(s) + lam.

``constant_curvature_shoot`` integrates this with shooting on k'(0): a
bisection enforces the twist condition int_0^L k' ds = lam (the integral is
monotone in k'(0) by ODE comparison), and the profile is accepted only if k'
returns to its initial value after one period.  For c > 0 no solution exists:
k'' <= -c/2 makes k' strictly decreasing, which the returned certificate
quantifies.  The only survivors are the flat torus (c = 0, lam = 0, k
constant) and the cusps k = +-sqrt(-c/2) s with matching twist.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError
from .geometry import (GroupoidMetric, HaarWeight, grad_norm_sq,
                       laplace_beltrami, scalar_curvature, soliton_residual)


class SteadyKind(Enum):
    FLAT_TORUS = "FlatTorus"
    HYPERBOLIC_CUSP_NORMALIZED = "HyperbolicCuspNormalized"
    NONE = "None"


@dataclass(frozen=True)
class SteadyClassification:
    kind: SteadyKind
    sup_r: float
    sup_cusp_residual: float   # sup |R + 2 lam^2|
    soliton_sup: float
    tol: float


@dataclass(frozen=True)
class ShootingSolution:
    """Periodic-twist profile: samples of k(s) with k(0) = 0."""

    s: np.ndarray
    k: np.ndarray
    k_prime0: float
    twist_residual: float       # |int k' - lam|
    periodicity_residual: float  # |k'(L) - k'(0)|


@dataclass(frozen=True)
class Infeasible:
    """No periodic-twist profile exists; carries the blocking certificate."""

    reason: str
    k_prime_drop: float   # guaranteed decrease of k' over one period (> 0)
    detail: str = ""


_BIG = 1e8


def _integrate_kprime(c: float, p0: float, length: float):
    """(k(L), p(L), sol) for k' = p, p' = -c/2 - p^2; None on finite-time blow-down."""

    def rhs(_s, state):
        return [state[1], -0.5 * c - state[1] ** 2]

    def escaped(_s, state):
        return abs(state[1]) - _BIG

    escaped.terminal = True
    sol = solve_ivp(rhs, (0.0, length), [0.0, p0], method="DOP853",
                    rtol=1e-12, atol=1e-14, events=escaped, dense_output=True)
    if sol.status == 1 or not sol.success:
        return None
    return sol


def constant_curvature_shoot(c: float, lam: float, length: float,
                             tol: float = 1e-10,
                             n_samples: int = 257) -> ShootingSolution | Infeasible:
    """Solve k'' + (k')^2 = -c/2 with twist lam over one period of length L."""
    if length <= 0.0:
        raise DomainError("period length must be positive")

    if c > 0.0:
        # k'' <= -c/2 < 0: k' drops by at least c*L/2 over a period, so it can
        # never be periodic; report the quantified decrease as the certificate.
        drop = 0.5 * c * length
        return Infeasible(
            reason="positive constant curvature admits no periodic k'",
            k_prime_drop=drop,
            detail=f"k'' + (k')^2 = -c/2 <= {-0.5 * c:.6g} forces "
                   f"k'(L) - k'(0) <= {-drop:.6g} for every k'(0)")

    def twist(p0: float) -> float:
        sol = _integrate_kprime(c, p0, length)
        if sol is None:
            return -np.inf  # blow-down to -infinity: twist unboundedly negative
        return sol.y[0, -1] - lam

    # a-priori bracket |k'| <= |lam|/L + sqrt(|c|/2)*L, padded and expanded
    bracket = abs(lam) / length + np.sqrt(0.5 * abs(c)) * length + 1.0
    lo, hi = -bracket, bracket
    for _ in range(60):
        if twist(lo) <= 0.0 <= twist(hi):
            break
        lo *= 2.0
        hi *= 2.0
    else:
        return Infeasible(reason="twist condition unsolvable in bracket",
                          k_prime_drop=0.0)

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if twist(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * (1.0 + abs(lo)):
            break
    p0 = 0.5 * (lo + hi)
    sol = _integrate_kprime(c, p0, length)
    if sol is None:
        return Infeasible(reason="profile escapes to -infinity within one period",
                          k_prime_drop=np.inf)
    twist_res = abs(sol.y[0, -1] - lam)
    period_res = abs(sol.y[1, -1] - p0)
    if twist_res > max(tol, 1e-11 * (1.0 + abs(lam))) or period_res > tol:
        return Infeasible(
            reason="k' is not periodic at the twist-matching shot",
            k_prime_drop=p0 - sol.y[1, -1],
            detail=f"twist residual {twist_res:.3g}, k'(L)-k'(0) = "
                   f"{sol.y[1, -1] - p0:.6g}")
    s = np.linspace(0.0, length, n_samples)
    return ShootingSolution(s, sol.sol(s)[0], p0, twist_res, period_res)


def classify_steady(g: GroupoidMetric, h: HaarWeight, tol: float = 1e-8) -> SteadyClassification:
    """FlatTorus / normalized hyperbolic cusp / None, by curvature residuals.

    The cusp test checks constant curvature -2 lam^2 rather than a flow
    limit: the blowdown limit is identified by its constant curvature.
    """
    if tol <= 0.0:
        raise DomainError("tolerance must be positive")
    lam = g.holonomy
    r = scalar_curvature(g).values
    sup_r = float(np.max(np.abs(r)))
    sup_cusp = float(np.max(np.abs(r + 2.0 * lam * lam)))
    soliton_sup = soliton_residual(g, h).sup_norm()
    if lam == 0.0 and sup_r <= tol and soliton_sup <= tol:
        kind = SteadyKind.FLAT_TORUS
    elif lam != 0.0 and sup_cusp <= tol:
        kind = SteadyKind.HYPERBOLIC_CUSP_NORMALIZED
    else:
        kind = SteadyKind.NONE
    return SteadyClassification(kind, sup_r, sup_cusp, soliton_sup, tol)
