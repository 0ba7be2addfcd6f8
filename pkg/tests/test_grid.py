"""Differentiation and quadrature kernel tests."""

import numpy as np
import pytest

from twistflow import grid as tg
from twistflow.errors import DomainError, GridMismatchError, UnsupportedOrderError
from twistflow.grid import GridSpec, PeriodicField, TwistedField


SPECS = [GridSpec(64, "spectral"), GridSpec(64, "fd4")]


def test_gridspec_validation():
    with pytest.raises(DomainError):
        GridSpec(4)
    with pytest.raises(DomainError):
        GridSpec(33, "spectral")  # spectral needs even n
    with pytest.raises(DomainError):
        GridSpec(64, "chebyshev")
    GridSpec(33, "fd4")  # odd is fine for fd4


def test_linear_twist_derivative_is_constant():
    spec = GridSpec(32)
    k = TwistedField(tg.constant(0.0, spec), 3.0)
    d = tg.derivative(k, 1, spec)
    np.testing.assert_allclose(d.values, 3.0, atol=1e-13)
    np.testing.assert_allclose(tg.derivative(k, 2, spec).values, 0.0, atol=1e-12)


def test_sine_derivative_spectral():
    spec = GridSpec(64, "spectral")
    f = tg.from_function(lambda y: np.sin(2 * np.pi * y), spec)
    exact = 2 * np.pi * np.cos(2 * np.pi * spec.nodes)
    err = np.max(np.abs(tg.derivative(f, 1, spec).values - exact))
    assert err <= 1e-10


@pytest.mark.parametrize("spec", SPECS)
def test_constant_derivative_zero(spec):
    c = tg.constant(4.2, spec)
    assert np.max(np.abs(tg.derivative(c, 1, spec).values)) <= 1e-12
    assert np.max(np.abs(tg.derivative(c, 2, spec).values)) <= 1e-9


@pytest.mark.parametrize("spec", SPECS)
def test_differentiation_linear(spec):
    rng = np.random.default_rng(7)
    f = tg.random_band_limited(rng, spec)
    g = tg.random_band_limited(rng, spec)
    lhs = tg.derivative(PeriodicField(2.0 * f.values - 3.0 * g.values), 1, spec).values
    rhs = 2.0 * tg.derivative(f, 1, spec).values - 3.0 * tg.derivative(g, 1, spec).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_spectral_exact_below_nyquist():
    spec = GridSpec(64, "spectral")
    y = spec.nodes
    for m in (1, 5, 17, 31):
        f = PeriodicField(np.sin(2 * np.pi * m * y))
        exact = 2 * np.pi * m * np.cos(2 * np.pi * m * y)
        err = np.max(np.abs(tg.derivative(f, 1, spec).values - exact))
        assert err <= 1e-8 * max(1.0, 2 * np.pi * m)


def test_fd4_convergence_order():
    errs = []
    for n in (32, 64, 128):
        spec = GridSpec(n, "fd4")
        f = tg.from_function(lambda y: np.sin(2 * np.pi * y), spec)
        exact = 2 * np.pi * np.cos(2 * np.pi * spec.nodes)
        errs.append(np.max(np.abs(tg.derivative(f, 1, spec).values - exact)))
    order1 = np.log2(errs[0] / errs[1])
    order2 = np.log2(errs[1] / errs[2])
    assert order1 > 3.8 and order2 > 3.8


def test_unsupported_order_and_mismatch():
    spec = GridSpec(32)
    f = tg.constant(1.0, spec)
    with pytest.raises(UnsupportedOrderError):
        tg.derivative(f, 3, spec)
    with pytest.raises(GridMismatchError):
        tg.derivative(f, 1, GridSpec(64))


def test_integrate_examples():
    spec = GridSpec(64)
    one = tg.constant(1.0, spec)
    assert tg.integrate(one, one, spec) == pytest.approx(1.0, abs=1e-14)
    sin2 = tg.from_function(lambda y: np.sin(2 * np.pi * y) ** 2, spec)
    assert tg.integrate(sin2, one, spec) == pytest.approx(0.5, abs=1e-12)
    cos1 = tg.from_function(lambda y: np.cos(2 * np.pi * y), spec)
    assert abs(tg.integrate(cos1, one, spec)) <= 1e-12


def test_integrate_rejects_nonpositive_weight():
    spec = GridSpec(32)
    with pytest.raises(DomainError):
        tg.integrate(tg.constant(1.0, spec), tg.constant(0.0, spec), spec)


@pytest.mark.parametrize("spec", SPECS)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_discrete_stokes(spec, seed):
    # integral of a derivative over the circle vanishes
    rng = np.random.default_rng(seed)
    f = tg.random_band_limited(rng, spec, max_mode=9, amplitude=1.3)
    val = tg.integrate(tg.derivative(f, 1, spec), tg.constant(1.0, spec), spec)
    assert abs(val) <= 1e-12


def test_twisted_round_trip_bitwise():
    spec = GridSpec(32)
    rng = np.random.default_rng(3)
    per = tg.random_band_limited(rng, spec)
    k = TwistedField(per, 1.5)
    k2 = TwistedField(PeriodicField(k.periodic_part.values), k.holonomy)
    assert np.array_equal(k.periodic_part.values, k2.periodic_part.values)
    assert k.holonomy == k2.holonomy


def test_values_are_immutable():
    spec = GridSpec(32)
    f = tg.constant(1.0, spec)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_eval_periodic_matches_samples_and_series():
    spec = GridSpec(64)
    rng = np.random.default_rng(11)
    f = tg.random_band_limited(rng, spec, max_mode=6)
    # exact at the nodes
    np.testing.assert_allclose(tg.eval_periodic(f.values, spec.nodes), f.values,
                               atol=1e-12)
    # exact between nodes for band-limited data
    pts = rng.uniform(0, 1, size=17)
    dense = GridSpec(4096)
    ref = tg.eval_periodic(f.values, pts)
    g = tg.from_function(lambda y: np.sin(2 * np.pi * 3 * y) + 0.5, spec)
    np.testing.assert_allclose(tg.eval_periodic(g.values, pts),
                               np.sin(2 * np.pi * 3 * pts) + 0.5, atol=1e-12)
    assert ref.shape == pts.shape
