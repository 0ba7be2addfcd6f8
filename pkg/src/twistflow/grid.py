"""Uniform-grid representation of periodic and twisted-periodic fields on the circle.

The coordinate circle is [0, 1) with nodes y_j = j/n.  A periodic field is a
plain sample vector; a twisted field k(y) = lam*y + k_per(y) satisfies
k(y+1) = k(y) + lam and is stored as (periodic part, holonomy) so that every
derivative of it is again strictly periodic.

Two differentiation backends are provided:

* ``spectral`` -- Fourier collocation (dense differentiation matrices built
  from the FFT; exact for trigonometric polynomials below Nyquist),
* ``fd4``      -- fourth-order centred differences (for convergence-order and
  discretization-independence tests).

Quadrature is the uniform rectangle rule, which is spectrally accurate for
smooth periodic integrands and exact for trigonometric polynomials below the
Nyquist frequency.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, GridMismatchError, UnsupportedOrderError

SCHEMES = ("spectral", "fd4")

# Retained-mode fraction for the spectral rhs filter (2/3 dealiasing rule).
# Filtering the quadratic nonlinearities also lowers the largest retained
# diffusion eigenvalue to (2*pi*n/3)^2, which keeps classic RK4 stable at the
# documented step limit 0.4*h^2*min(e^{2u}).
DEALIAS_FRACTION = 1.0 / 3.0


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid over the coordinate circle [0, 1)."""

    n_nodes: int
    scheme: str = "spectral"

    def __post_init__(self):
        if self.n_nodes < 8:
            raise DomainError(f"n_nodes must be >= 8, got {self.n_nodes}")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.scheme == "spectral" and self.n_nodes % 2 != 0:
            raise DomainError("spectral scheme requires an even number of nodes")

    @property
    def h(self) -> float:
        return 1.0 / self.n_nodes

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes) / self.n_nodes


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=np.float64))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PeriodicField:
    """Samples of a smooth 1-periodic function at the grid nodes."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        if self.values.ndim != 1:
            raise DomainError("PeriodicField expects a 1-d sample vector")

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class TwistedField:
    """k(y) = holonomy*y + periodic_part(y), so k(y+1) = k(y) + holonomy."""

    periodic_part: PeriodicField
    holonomy: float

    @property
    def n(self) -> int:
        return self.periodic_part.n

    def samples_unwrapped(self, spec: GridSpec) -> np.ndarray:
        """Raw (non-periodic) samples lam*y_j + k_per(y_j) on [0,1)."""
        return self.holonomy * spec.nodes + self.periodic_part.values


def _circulant(kernel: np.ndarray) -> np.ndarray:
    n = kernel.shape[0]
    idx = np.arange(n)
    return kernel[(idx[:, None] - idx[None, :]) % n]


def _spectral_operators(n: int):
    # FFT differentiation operators as exact circulants.  The kernels (first
    # columns) are cleaned up so that structural identities hold exactly in
    # floating point: D1 is antisymmetric with zero row sums, D2 symmetric
    # with zero row sums (derivatives annihilate constants bitwise), and the
    # dealiasing filter is symmetric and preserves constants bitwise.
    freq = 2.0 * np.pi * np.fft.rfftfreq(n, d=1.0 / n)
    e0 = np.zeros(n)
    e0[0] = 1.0
    spec0 = np.fft.rfft(e0)
    sym1 = 1j * freq
    if n % 2 == 0:
        sym1[-1] = 0.0  # odd derivative of the Nyquist mode aliases to zero
    c1 = np.fft.irfft(sym1 * spec0, n=n)
    c2 = np.fft.irfft(-(freq**2) * spec0, n=n)
    keep = (np.fft.rfftfreq(n, d=1.0 / n) <= np.floor(n * DEALIAS_FRACTION)).astype(float)
    cf = np.fft.irfft(keep * spec0, n=n)

    c1 = 0.5 * (c1 - np.roll(c1[::-1], 1))   # kernel antisymmetry c[m] = -c[n-m]
    c1[0] = 0.0
    c2 = 0.5 * (c2 + np.roll(c2[::-1], 1))   # kernel symmetry c[m] = c[n-m]
    c2[0] -= c2.sum()
    cf = 0.5 * (cf + np.roll(cf[::-1], 1))
    cf[0] += 1.0 - cf.sum()
    return _circulant(c1), _circulant(c2), _circulant(cf)


def _fd4_operators(n: int):
    h = 1.0 / n
    d1 = np.zeros((n, n))
    d2 = np.zeros((n, n))
    idx = np.arange(n)
    for off, c1, c2 in ((-2, 1.0, -1.0), (-1, -8.0, 16.0), (0, 0.0, -30.0),
                        (1, 8.0, 16.0), (2, -1.0, -1.0)):
        d1[idx, (idx + off) % n] += c1 / (12.0 * h)
        d2[idx, (idx + off) % n] += c2 / (12.0 * h * h)
    return d1, d2, None


@lru_cache(maxsize=None)
def operators(spec: GridSpec):
    """(D1, D2, rhs_filter) dense operators for the grid; cached per spec.

    ``rhs_filter`` is the 2/3-rule dealiasing projector for the spectral
    scheme and ``None`` for fd4 (whose stability limit needs no filtering).
    """
    if spec.scheme == "spectral":
        return _spectral_operators(spec.n_nodes)
    return _fd4_operators(spec.n_nodes)


def mode_filter(spec: GridSpec, max_mode: int) -> np.ndarray:
    """Dense projection onto Fourier modes <= max_mode (spectral grids only).

    Used by the ill-posed forward-coupled option, whose backward-heat growth
    rate e^{(2 pi m)^2 t} makes even the 2/3-rule band far too wide: roundoff
    in mode m is amplified beyond O(1) once t > ~m^{-2}.
    """
    if spec.scheme != "spectral":
        raise DomainError("mode_filter requires the spectral scheme")
    n = spec.n_nodes
    f_ident = np.fft.rfft(np.eye(n), axis=0)
    keep = np.fft.rfftfreq(n, d=1.0 / n) <= max_mode
    return np.fft.irfft(keep[:, None] * f_ident, n=n, axis=0)


def _check_grid(values: np.ndarray, spec: GridSpec):
    if values.shape[0] != spec.n_nodes:
        raise GridMismatchError(
            f"field has {values.shape[0]} samples, grid has {spec.n_nodes} nodes")


def derivative(field: TwistedField | PeriodicField, order: int, spec: GridSpec) -> PeriodicField:
    """order-th coordinate derivative; always a strictly periodic field.

    For a twisted field the first derivative carries the additive holonomy
    contribution; higher derivatives of the linear twist vanish.
    """
    if order not in (1, 2):
        raise UnsupportedOrderError(f"derivative order must be 1 or 2, got {order}")
    if isinstance(field, TwistedField):
        per = field.periodic_part.values
        _check_grid(per, spec)
        d1, d2, _ = operators(spec)
        if order == 1:
            return PeriodicField(d1 @ per + field.holonomy)
        return PeriodicField(d2 @ per)
    _check_grid(field.values, spec)
    d1, d2, _ = operators(spec)
    mat = d1 if order == 1 else d2
    return PeriodicField(mat @ field.values)


def integrate(f: PeriodicField, weight: PeriodicField, spec: GridSpec) -> float:
    """Rectangle-rule quadrature of the circle integral of f * weight."""
    _check_grid(f.values, spec)
    _check_grid(weight.values, spec)
    if np.any(weight.values <= 0.0):
        raise DomainError("quadrature weight must be strictly positive")
    return float(spec.h * np.sum(f.values * weight.values))


def constant(value: float, spec: GridSpec) -> PeriodicField:
    return PeriodicField(np.full(spec.n_nodes, float(value)))


def from_function(fn, spec: GridSpec) -> PeriodicField:
    return PeriodicField(np.asarray(fn(spec.nodes), dtype=np.float64))


def eval_periodic(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate the trigonometric interpolant of the samples at arbitrary points.

    Exact for band-limited data; this is the canonical continuous extension of
    a PeriodicField.
    """
    values = np.asarray(values, dtype=np.float64)
    points = np.atleast_1d(np.asarray(points, dtype=np.float64))
    n = values.shape[0]
    coeff = np.fft.rfft(values) / n
    out = np.full(points.shape, coeff[0].real)
    m_top = coeff.shape[0] - 1
    for m in range(1, m_top + (n % 2)):
        ang = 2.0 * np.pi * m * points
        out += 2.0 * (coeff[m].real * np.cos(ang) - coeff[m].imag * np.sin(ang))
    if n % 2 == 0:
        out += coeff[-1].real * np.cos(np.pi * n * points)
    return out


def random_band_limited(rng: np.random.Generator, spec: GridSpec,
                        max_mode: int = 8, amplitude: float = 0.3) -> PeriodicField:
    """Random trigonometric polynomial with modes 1..max_mode.

    Coefficients are drawn uniformly and scaled so the sup-norm is roughly
    ``amplitude``; used by the randomized property suites.
    """
    y = spec.nodes
    out = np.zeros(spec.n_nodes)
    for m in range(1, max_mode + 1):
        a, b = rng.uniform(-1.0, 1.0, size=2) / m
        out += a * np.cos(2.0 * np.pi * m * y) + b * np.sin(2.0 * np.pi * m * y)
    peak = np.max(np.abs(out))
    if peak > 0.0:
        out *= amplitude / peak
    return PeriodicField(out)
