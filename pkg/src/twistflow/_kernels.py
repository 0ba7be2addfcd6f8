"""Compiled inner loops for the forward flow and the backward conjugate solve.

Plain explicit RK4 method-of-lines steppers; only dispatch overhead is
compiled away.  The grid operators (derivatives, dealiasing filter) are
translation invariant on the uniform periodic grid, i.e. circulant, so the
kernels apply them as cyclic convolutions against their first columns: the
whole working set fits in L1 and one step costs ~12 n^2 fused multiply-adds.

The forward kernel evolves the periodic part of k only: du/dt = dk/dt makes
u - k_per exactly constant in time, so u is reconstructed as
k_per + (u0 - k_per0) with identical stage increments.

The convolution helpers use fastmath; every guard (blow-up, positivity,
finiteness) deliberately lives in non-fastmath functions so NaN/Inf checks
cannot be optimized away.

Status codes returned by the kernels:
    0  reached the requested time
    1  blow-up guard tripped (non-finite state or max|R| above threshold)
    2  time step underflow (stagnation)
    3  fixed time step violates the stability limit
    4  positivity loss in the backward solve
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_STAGNATION = 2
STATUS_UNSTABLE_DT = 3
STATUS_POSITIVITY = 4

# Policy dt may exceed a freshly recomputed limit by this factor before the
# interval is redone; the dealiased spectral limit (~0.63 h^2 e^{2u}) leaves
# a 1.57x hard margin over the documented 0.4 coefficient, so brief 1.25x
# excursions while u drifts downward are still stable.
_RECHECK_FACTOR = 1.25


def circulant_kernel(mat: np.ndarray) -> np.ndarray:
    """Double-length reversed first column r with (mat @ x)[i] = sum_j r[n-i+j] x[j]."""
    c = np.ascontiguousarray(mat[:, 0])
    n = c.shape[0]
    idx = (n - np.arange(2 * n)) % n
    return np.ascontiguousarray(c[idx])


@njit(cache=True, fastmath=True)
def _conv_pair(r1, r2, x, out1, out2):
    n = x.shape[0]
    for i in range(n):
        a1 = 0.0
        a2 = 0.0
        base = n - i
        for j in range(n):
            a1 += r1[base + j] * x[j]
            a2 += r2[base + j] * x[j]
        out1[i] = a1
        out2[i] = a2


@njit(cache=True, fastmath=True)
def _conv_one(r, x, out):
    n = x.shape[0]
    for i in range(n):
        a = 0.0
        base = n - i
        for j in range(n):
            a += r[base + j] * x[j]
        out[i] = a


@njit(cache=True, fastmath=True)
def _ricci_stage(kp, f, w0, w0y, lam, r1, r2, rf, rf_f, use_filter, coupled,
                 ky, kyy, tmp, out_k, out_f):
    """rhs evaluation into out_k/out_f (guards live in the callers)."""
    n = kp.shape[0]
    _conv_pair(r1, r2, kp, ky, kyy)
    for j in range(n):
        kyj = ky[j] + lam
        uyj = ky[j] + w0y[j]          # u_y = k_per_y + w0_y
        e2u = math.exp(-2.0 * (kp[j] + w0[j]))
        tmp[j] = e2u * (kyy[j] + kyj * (kyj - uyj))
    if use_filter:
        _conv_one(rf, tmp, out_k)
    else:
        out_k[:] = tmp
    if coupled:
        fy = np.empty(n)
        fyy = np.empty(n)
        _conv_pair(r1, r2, f, fy, fyy)
        for j in range(n):
            kyj = ky[j] + lam
            uyj = ky[j] + w0y[j]
            e2u = math.exp(-2.0 * (kp[j] + w0[j]))
            tmp[j] = e2u * (-fyy[j] + uyj * fy[j] + kyj * kyj
                            + kyj * fy[j] + fy[j] * fy[j])
        _conv_one(rf_f, tmp, out_f)


@njit(cache=True)
def ricci_forward_kernel(kp0, f0, w0, w0y, lam, r1, r2, rf, rf_f, use_filter,
                         coupled, h, c_cfl, safety, dt_fixed, t0, ckpt_times,
                         blow_threshold, dt_floor):
    n = kp0.shape[0]
    m = ckpt_times.shape[0]
    kps = np.zeros((m, n))
    fs = np.zeros((m, n))
    steps = np.zeros(m, dtype=np.int64)
    dts = np.zeros(m)
    kp = kp0.copy()
    f = f0.copy()
    kp_s = np.empty(n)
    f_s = f0.copy()
    ky = np.empty(n)
    kyy = np.empty(n)
    tmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    g1 = np.zeros(n)
    g2 = np.zeros(n)
    g3 = np.zeros(n)
    g4 = np.zeros(n)
    t = t0
    status = STATUS_OK
    reached = 0
    limit_coef = c_cfl * h * h

    for i in range(m):
        t_next = ckpt_times[i]
        while t < t_next - 1e-13 * (1.0 + abs(t_next)):
            u_min = kp[0] + w0[0]
            for j in range(1, n):
                uj = kp[j] + w0[j]
                if uj < u_min:
                    u_min = uj
            dt_lim = limit_coef * math.exp(2.0 * u_min)
            if dt_fixed > 0.0:
                if dt_fixed > dt_lim * (1.0 + 1e-9):
                    status = STATUS_UNSTABLE_DT
                    break
                dt_cap = dt_fixed
            else:
                dt_cap = safety * dt_lim
            if dt_cap < dt_floor:
                status = STATUS_STAGNATION
                break
            remaining = t_next - t
            n_sub = int(math.ceil(remaining / dt_cap - 1e-12))
            if n_sub < 1:
                n_sub = 1
            dt = remaining / n_sub
            dts[i] = dt
            redo = False
            for _ in range(n_sub):
                _ricci_stage(kp, f, w0, w0y, lam, r1, r2, rf, rf_f,
                             use_filter, coupled, ky, kyy, tmp, k1, g1)
                guard = 0.0
                for j in range(n):
                    a = abs(k1[j])
                    if not (a <= guard):   # catches NaN as well
                        guard = a
                if not (2.0 * guard <= blow_threshold):
                    status = STATUS_BLOWUP
                    break
                half = 0.5 * dt
                for j in range(n):
                    kp_s[j] = kp[j] + half * k1[j]
                if coupled:
                    for j in range(n):
                        f_s[j] = f[j] + half * g1[j]
                _ricci_stage(kp_s, f_s, w0, w0y, lam, r1, r2, rf, rf_f,
                             use_filter, coupled, ky, kyy, tmp, k2, g2)
                for j in range(n):
                    kp_s[j] = kp[j] + half * k2[j]
                if coupled:
                    for j in range(n):
                        f_s[j] = f[j] + half * g2[j]
                _ricci_stage(kp_s, f_s, w0, w0y, lam, r1, r2, rf, rf_f,
                             use_filter, coupled, ky, kyy, tmp, k3, g3)
                for j in range(n):
                    kp_s[j] = kp[j] + dt * k3[j]
                if coupled:
                    for j in range(n):
                        f_s[j] = f[j] + dt * g3[j]
                _ricci_stage(kp_s, f_s, w0, w0y, lam, r1, r2, rf, rf_f,
                             use_filter, coupled, ky, kyy, tmp, k4, g4)
                sixth = dt / 6.0
                u_min = np.inf
                for j in range(n):
                    kp[j] += sixth * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j])
                    uj = kp[j] + w0[j]
                    if uj < u_min:
                        u_min = uj
                if coupled:
                    for j in range(n):
                        f[j] += sixth * (g1[j] + 2.0 * (g2[j] + g3[j]) + g4[j])
                t += dt
                steps[i] += 1
                lim_now = limit_coef * math.exp(2.0 * u_min)
                if dt_fixed > 0.0:
                    if dt > lim_now * (1.0 + 1e-9):
                        status = STATUS_UNSTABLE_DT
                        break
                elif dt > lim_now * _RECHECK_FACTOR:
                    redo = True  # u dropped noticeably: recompute dt
                    break
            if status != STATUS_OK:
                break
            if redo:
                continue
        if status != STATUS_OK:
            break
        kps[i] = kp
        fs[i] = f
        reached = i + 1
    return status, reached, kps, fs, steps, dts, kp, f, t


@njit(cache=True, fastmath=True)
def _conjugate_stage(v, u_hi, u_lo, ky_hi, ky_lo, uy_hi, uy_lo, w_hi,
                     r1, r2, rf, use_filter, vy, vyy, tmp, out):
    n = v.shape[0]
    _conv_pair(r1, r2, v, vy, vyy)
    w_lo = 1.0 - w_hi
    for j in range(n):
        u_j = w_hi * u_hi[j] + w_lo * u_lo[j]
        ky_j = w_hi * ky_hi[j] + w_lo * ky_lo[j]
        uy_j = w_hi * uy_hi[j] + w_lo * uy_lo[j]
        e2u = math.exp(-2.0 * u_j)
        tmp[j] = e2u * (vyy[j] - (uy_j + ky_j) * vy[j] + ky_j * ky_j * v[j])
    if use_filter:
        _conv_one(rf, tmp, out)
    else:
        out[:] = tmp


@njit(cache=True)
def conjugate_backward_kernel(v_end, ckpt_times, u_ck, ky_ck, uy_ck, r1, r2, rf,
                              use_filter, h, c_cfl, safety, dt_floor):
    n = v_end.shape[0]
    m = ckpt_times.shape[0]
    vs = np.zeros((m, n))
    vs[m - 1] = v_end
    v = v_end.copy()
    v_s = np.empty(n)
    vy = np.empty(n)
    vyy = np.empty(n)
    tmp = np.empty(n)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    status = STATUS_OK
    limit_coef = c_cfl * h * h
    solved_down_to = m - 1

    for i in range(m - 1, 0, -1):
        t_hi = ckpt_times[i]
        t_lo = ckpt_times[i - 1]
        span = t_hi - t_lo
        u_min = min(np.min(u_ck[i]), np.min(u_ck[i - 1]))
        dt_cap = safety * limit_coef * math.exp(2.0 * u_min)
        if dt_cap < dt_floor:
            status = STATUS_STAGNATION
            break
        n_sub = int(math.ceil(span / dt_cap - 1e-12))
        if n_sub < 1:
            n_sub = 1
        dt = span / n_sub
        tau = 0.0
        for _ in range(n_sub):
            w0f = (span - tau) / span
            whf = (span - (tau + 0.5 * dt)) / span
            w1f = (span - (tau + dt)) / span
            _conjugate_stage(v, u_ck[i], u_ck[i - 1], ky_ck[i], ky_ck[i - 1],
                             uy_ck[i], uy_ck[i - 1], w0f, r1, r2, rf,
                             use_filter, vy, vyy, tmp, k1)
            for j in range(n):
                v_s[j] = v[j] + 0.5 * dt * k1[j]
            _conjugate_stage(v_s, u_ck[i], u_ck[i - 1], ky_ck[i], ky_ck[i - 1],
                             uy_ck[i], uy_ck[i - 1], whf, r1, r2, rf,
                             use_filter, vy, vyy, tmp, k2)
            for j in range(n):
                v_s[j] = v[j] + 0.5 * dt * k2[j]
            _conjugate_stage(v_s, u_ck[i], u_ck[i - 1], ky_ck[i], ky_ck[i - 1],
                             uy_ck[i], uy_ck[i - 1], whf, r1, r2, rf,
                             use_filter, vy, vyy, tmp, k3)
            for j in range(n):
                v_s[j] = v[j] + dt * k3[j]
            _conjugate_stage(v_s, u_ck[i], u_ck[i - 1], ky_ck[i], ky_ck[i - 1],
                             uy_ck[i], uy_ck[i - 1], w1f, r1, r2, rf,
                             use_filter, vy, vyy, tmp, k4)
            bad = False
            for j in range(n):
                v[j] += (dt / 6.0) * (k1[j] + 2.0 * (k2[j] + k3[j]) + k4[j])
                if not (v[j] > 0.0):  # also catches NaN
                    bad = True
            tau += dt
            if bad:
                status = STATUS_POSITIVITY
                break
        if status != STATUS_OK:
            break
        vs[i - 1] = v
        solved_down_to = i - 1
    return status, solved_down_to, vs
