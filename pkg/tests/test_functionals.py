"""F-functional, lambda eigenproblem, uniqueness energy, Harnack residual."""

import numpy as np
import pytest

from twistflow import flow as fl
from twistflow import functionals as fn
from twistflow import geometry as geo
from twistflow import grid as tg
from twistflow.errors import DomainError, EigensolverError
from twistflow.grid import GridSpec, PeriodicField, TwistedField

from oracles import TrigPolynomial, dense_eig_oracle, metric_from_polys


def sin_state(spec, k_amp=0.2, lam=0.0):
    k = TwistedField(tg.from_function(lambda y: k_amp * np.sin(2 * np.pi * y), spec), lam)
    return fl.FlowState(0.0, geo.GroupoidMetric(k, tg.constant(0.0, spec), spec),
                        geo.reference_haar(spec))


class TestSymbolicReductions:
    """sympy validation of the reduced formulas used by this module."""

    def _setup(self):
        import sympy as sp

        y = sp.symbols("y")
        k = sp.Function("k")(y)
        u = sp.Function("u")(y)
        e2u = sp.exp(-2 * u)
        lap_bar = lambda w: e2u * (sp.diff(w, y, 2) - sp.diff(u, y) * sp.diff(w, y))
        grad_sq = lambda w: e2u * sp.diff(w, y) ** 2
        div_full = lambda a: e2u * (sp.diff(a, y) + (sp.diff(k, y) - sp.diff(u, y)) * a)
        return sp, y, k, u, lap_bar, grad_sq, div_full

    def test_potential_reduces_to_minus_grad_k_sq(self):
        # B = 2 div(theta_0) - |theta_0|^2 + R  ==  -|grad k|^2
        sp, y, k, u, lap_bar, grad_sq, div_full = self._setup()
        r_scalar = -2 * (lap_bar(k) + grad_sq(k))
        b_pot = 2 * div_full(sp.diff(k, y)) - grad_sq(k) + r_scalar
        assert sp.simplify(b_pot + grad_sq(k)) == 0

    def test_conjugate_reaction_reduces_to_minus_grad_k_sq(self):
        # Lambda = R + div(theta_0) - |theta_0|^2 + beta_0  ==  -|grad k|^2
        sp, y, k, u, lap_bar, grad_sq, div_full = self._setup()
        r_scalar = -2 * (lap_bar(k) + grad_sq(k))
        beta0 = lap_bar(k) + grad_sq(k)
        lam_coeff = r_scalar + div_full(sp.diff(k, y)) - grad_sq(k) + beta0
        assert sp.simplify(lam_coeff + grad_sq(k)) == 0

    def test_gradient_evolution_identity(self):
        # along dk/dt = du/dt = psi: (d/dt - lap_bar)|grad k|^2
        #   = -2(|grad k|^4 + (lap_bar k)^2) + <grad k, grad |grad k|^2>
        import sympy as sp

        y, t = sp.symbols("y t")
        k = sp.Function("k")(y, t)
        u = sp.Function("u")(y, t)
        e2u = sp.exp(-2 * u)
        lap_bar = lambda w: e2u * (sp.diff(w, y, 2) - sp.diff(u, y) * sp.diff(w, y))
        psi = lap_bar(k) + e2u * sp.diff(k, y) ** 2
        x_field = e2u * sp.diff(k, y) ** 2
        xt = sp.diff(x_field, t)
        subs = {sp.Derivative(k, (y, 1), (t, 1)): sp.diff(psi, y),
                sp.Derivative(k, t): psi,
                sp.Derivative(u, t): psi}
        xt = xt.subs(subs)
        rhs = (-2 * (x_field**2 + lap_bar(k) ** 2)
               + e2u * sp.diff(k, y) * sp.diff(x_field, y))
        assert sp.simplify(xt - lap_bar(x_field) - rhs) == 0


class TestFFunctional:
    def test_flat_torus_zero(self):
        spec = GridSpec(64)
        assert fn.f_functional(geo.flat_torus(spec), geo.reference_haar(spec)) == 0.0

    def test_cusp_closed_form(self):
        spec = GridSpec(64)
        lam = 1.3
        val = fn.f_functional(geo.cusp(spec, lam), geo.reference_haar(spec))
        assert val == pytest.approx(-lam**2, abs=1e-12)

    def test_self_convergence(self):
        vals = {}
        for n in (128, 512):
            spec = GridSpec(n)
            k = TwistedField(tg.from_function(lambda y: 0.1 * np.sin(2 * np.pi * y), spec), 0.0)
            g = geo.GroupoidMetric(k, tg.constant(0.0, spec), spec)
            vals[n] = fn.f_functional(g, geo.reference_haar(spec))
        assert abs(vals[128] - vals[512]) <= 1e-9

    def test_reparametrization_invariance(self):
        spec = GridSpec(128)
        rng = np.random.default_rng(3)
        g = geo.GroupoidMetric(TwistedField(tg.random_band_limited(rng, spec), 0.9),
                               tg.random_band_limited(rng, spec), spec)
        h = geo.HaarWeight(tg.random_band_limited(rng, spec))
        base = fn.f_functional(g, h)
        g2, h2 = geo.reparametrize(g, h, 0.35)
        assert fn.f_functional(g2, h2) == pytest.approx(base, abs=1e-9)

    def test_shift_invariance(self):
        spec = GridSpec(64)
        rng = np.random.default_rng(4)
        kp = tg.random_band_limited(rng, spec)
        u = tg.random_band_limited(rng, spec)
        h = geo.HaarWeight(tg.random_band_limited(rng, spec))
        g1 = geo.GroupoidMetric(TwistedField(kp, 0.4), u, spec)
        g2 = geo.GroupoidMetric(TwistedField(PeriodicField(kp.values + 2.7), 0.4), u, spec)
        # floor ~2e-11: the shift constant rides through D2's row-sum noise
        assert fn.f_functional(g2, h) == pytest.approx(fn.f_functional(g1, h), abs=1e-10)


class TestLambdaFunctional:
    def test_flat_torus(self):
        res = fn.lambda_functional(geo.flat_torus(GridSpec(64)))
        assert abs(res.value) <= 1e-12
        assert np.min(res.ground_state.values) > 0

    def test_cusp_shifted_spectrum(self):
        lam0 = 1.0
        res = fn.lambda_functional(geo.cusp(GridSpec(64), lam0))
        assert res.value == pytest.approx(-lam0**2, abs=1e-9)
        spread = np.max(res.ground_state.values) - np.min(res.ground_state.values)
        assert spread <= 1e-10  # constant ground state

    def test_against_dense_oracle(self):
        spec = GridSpec(64)
        kpoly = TrigPolynomial(sin_amps={1: 0.3})
        g = metric_from_polys(kpoly, TrigPolynomial(), 0.0, spec)
        mine = fn.lambda_functional(g).value
        oracle = dense_eig_oracle(kpoly, TrigPolynomial(), 0.0, 256)
        assert mine == pytest.approx(oracle, abs=1e-8)

    def test_minimizer_attains_value(self):
        spec = GridSpec(128)
        rng = np.random.default_rng(8)
        g = geo.GroupoidMetric(TwistedField(tg.random_band_limited(rng, spec), 0.7),
                               tg.random_band_limited(rng, spec), spec)
        res = fn.lambda_functional(g)
        f_val = fn.f_functional(g, geo.HaarWeight(res.minimizer_f))
        assert f_val == pytest.approx(res.value, abs=1e-9)
        mass = geo.total_mass(g, geo.HaarWeight(res.minimizer_f))
        assert mass == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_rayleigh_lower_bound(self, seed):
        spec = GridSpec(64)
        rng = np.random.default_rng(40 + seed)
        g = geo.GroupoidMetric(TwistedField(tg.random_band_limited(rng, spec), 0.5),
                               tg.random_band_limited(rng, spec), spec)
        lam_min = fn.lambda_functional(g).value
        for _ in range(10):
            f = tg.random_band_limited(rng, spec, amplitude=0.8)
            shift = np.log(geo.total_mass(g, geo.HaarWeight(f)))
            h = geo.HaarWeight(PeriodicField(f.values + shift))
            assert fn.f_functional(g, h) >= lam_min - 1e-9

    def test_invariances(self):
        spec = GridSpec(128)
        kpoly = TrigPolynomial(sin_amps={1: 0.25})
        g = metric_from_polys(kpoly, TrigPolynomial(cos_amps={1: 0.15}), 0.8, spec)
        base = fn.lambda_functional(g).value
        g_shift = geo.GroupoidMetric(
            TwistedField(PeriodicField(g.k.periodic_part.values + 1.7), 0.8), g.u, spec)
        assert fn.lambda_functional(g_shift).value == pytest.approx(base, abs=1e-9)
        g_rep, _ = geo.reparametrize(g, geo.reference_haar(spec), 0.3)
        assert fn.lambda_functional(g_rep).value == pytest.approx(base, abs=1e-9)


class TestVariationAndMonotonicity:
    def test_requires_coupled(self):
        spec = GridSpec(32)
        traj = fl.evolve(sin_state(spec, 0.1), 0.2, fl.FlowControls(checkpoint_interval=0.05))
        with pytest.raises(DomainError):
            fn.f_variation_residual(traj)

    def test_flat_torus_zero_residual(self):
        spec = GridSpec(32)
        traj = fl.evolve(sin_state(spec, 0.0), 0.5, fl.FlowControls(checkpoint_interval=0.05))
        coupled = fl.with_conjugate_haar(traj)
        vs = fn.f_variation_residual(coupled)
        assert vs.interior_max() <= 1e-12
        assert vs.monotone_violation() == 0.0

    def test_twisted_identity_and_order(self):
        spec = GridSpec(128)
        traj = fl.evolve(sin_state(spec, 0.2, lam=1.0), 1.0,
                         fl.FlowControls(checkpoint_interval=1e-3))
        coupled = fl.with_conjugate_haar(traj, t_start=0.5)
        vs = fn.f_variation_residual(coupled)
        assert vs.interior_max() <= 1e-5
        assert vs.monotone_violation() == 0.0
        sub = fl.FlowTrajectory(traj.spec, traj.holonomy, traj.times[::2],
                                traj.kps[::2], traj.us[::2], traj.fs[::2],
                                traj.step_log)
        vs2 = fn.f_variation_residual(fl.with_conjugate_haar(sub, t_start=0.5))
        order = np.log2(vs2.interior_max() / vs.interior_max())
        assert order >= 1.9

    def test_lambda_monotone_on_flow(self):
        spec = GridSpec(64)
        traj = fl.evolve(sin_state(spec, 0.2), 0.3,
                         fl.FlowControls(checkpoint_interval=0.01))
        series = fn.lambda_monotonicity(traj)
        assert series.nondecreasing, series.violations
        assert series.values[0] < -1e-3
        assert abs(series.values[-1]) <= 1e-8  # flattens to the torus

    def test_lambda_closed_form_on_cusp(self):
        # the flow lifts u as well as k, so e^{2u} = 1 + 2 lam^2 t and
        # lambda(t) = -lam^2/(2 lam^2 t + 1): nondecreasing, exactly the
        # saturating envelope of the pinching bound
        spec = GridSpec(32)
        lam0 = 1.0
        st = fl.FlowState(0.0, geo.cusp(spec, lam0), geo.reference_haar(spec))
        traj = fl.evolve(st, 0.5, fl.FlowControls(checkpoint_interval=0.1))
        series = fn.lambda_monotonicity(traj)
        expect = -lam0**2 / (2 * lam0**2 * series.times + 1.0)
        np.testing.assert_allclose(series.values, expect, atol=1e-9)
        assert series.nondecreasing


class TestUniquenessEnergy:
    def test_identical_trajectories_zero(self):
        spec = GridSpec(64)
        traj = fl.evolve(sin_state(spec, 0.2), 1.0, fl.FlowControls(checkpoint_interval=0.25))
        out = fn.uniqueness_energy(traj, traj)
        assert all(b.E == 0.0 for b in out)
        assert all(b.E == b.S + b.H + b.I for b in out)

    def test_richardson_pair_tiny(self):
        spec = GridSpec(64)
        st = sin_state(spec, 0.2)
        dt0 = 0.5 * fl.stability_limit(st)
        ta = fl.evolve(st, 1.0, fl.FlowControls(checkpoint_interval=0.25, dt_fixed=dt0))
        tb = fl.evolve(st, 1.0, fl.FlowControls(checkpoint_interval=0.25, dt_fixed=dt0 / 2))
        out = fn.uniqueness_energy(ta, tb)
        assert max(b.E for b in out) <= 1e-12

    def test_perturbed_growth_is_tame(self):
        spec = GridSpec(64)
        st = sin_state(spec, 0.2)
        st2 = fl.FlowState(0.0, geo.GroupoidMetric(
            TwistedField(PeriodicField(st.metric.k.periodic_part.values
                                       + 1e-3 * np.sin(4 * np.pi * spec.nodes)), 0.0),
            st.metric.u, spec), st.haar)
        ctl = fl.FlowControls(checkpoint_interval=0.1)
        ta, tb = fl.evolve(st, 1.0, ctl), fl.evolve(st2, 1.0, ctl)
        out = fn.uniqueness_energy(ta, tb)
        es = np.array([b.E for b in out])
        ts = np.array([b.t for b in out])
        assert np.all(es > 0)
        slope = np.polyfit(ts, np.log(es), 1)[0]
        assert abs(slope) <= 50.0

    def test_preconditions(self):
        spec = GridSpec(64)
        traj = fl.evolve(sin_state(spec, 0.1), 0.5, fl.FlowControls(checkpoint_interval=0.25))
        other = fl.evolve(sin_state(GridSpec(32), 0.1), 0.5,
                          fl.FlowControls(checkpoint_interval=0.25))
        with pytest.raises(DomainError):
            fn.uniqueness_energy(traj, other)
        with pytest.raises(DomainError):
            fn.uniqueness_energy(traj, traj, alpha_exp=1.5)


class TestHarnack:
    def test_flat_torus_both_sides_zero(self):
        spec = GridSpec(64)
        traj = fl.evolve(sin_state(spec, 0.0), 0.3, fl.FlowControls(checkpoint_interval=1e-3))
        win = traj.window(0.1, 0.3)
        vser = fl.backward_conjugate_solve(traj, tg.constant(1.0, spec), 0.1, 0.3)
        hs = fn.harnack_residual(win, vser, eval_mode_cap=2)
        assert hs.interior_max() <= 1e-10
        assert hs.rhs_min >= 0.0

    def test_sinusoid_residual_and_positivity(self):
        spec = GridSpec(128)
        traj = fl.evolve(sin_state(spec, 0.2), 0.3, fl.FlowControls(checkpoint_interval=1e-3))
        win = traj.window(0.1, 0.3)
        vser = fl.backward_conjugate_solve(traj, tg.constant(1.0, spec), 0.1, 0.3)
        hs = fn.harnack_residual(win, vser, eval_mode_cap=16)
        assert hs.interior_max() <= 1e-4
        assert hs.rhs_min >= 0.0

    def test_mismatched_series_rejected(self):
        spec = GridSpec(32)
        traj = fl.evolve(sin_state(spec, 0.1), 0.2, fl.FlowControls(checkpoint_interval=0.05))
        vser = fl.backward_conjugate_solve(traj, tg.constant(1.0, spec))
        with pytest.raises(DomainError):
            fn.harnack_residual(traj, vser[:-1])


def test_steady_soliton_rigidity_scaling():
    # on a flattening run, sup|R| and sup|theta| stay bounded by a fixed
    # multiple of the soliton-residual sup-norm
    spec = GridSpec(64)
    traj = fl.evolve(sin_state(spec, 0.2), 0.25, fl.FlowControls(checkpoint_interval=0.025))
    coupled = fl.with_conjugate_haar(traj, t_start=0.05)
    ratios_r = []
    for i in range(len(coupled)):
        g = geo.GroupoidMetric(TwistedField(PeriodicField(coupled.kps[i]), 0.0),
                               PeriodicField(coupled.us[i]), spec)
        h = geo.HaarWeight(PeriodicField(coupled.fs[i]))
        eps = geo.soliton_residual(g, h).sup_norm()
        sup_r = np.max(np.abs(geo.scalar_curvature(g).values))
        theta = geo.mean_curvature_form(g, h).values
        sup_th = np.max(np.abs(np.exp(-g.u.values) * theta))
        if eps > 1e-13:
            ratios_r.append(max(sup_r, sup_th) / eps)
    c_fit = max(ratios_r)
    assert np.isfinite(c_fit)
    assert all(r <= 1.05 * c_fit for r in ratios_r)
