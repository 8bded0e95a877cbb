import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import EC_CAVITY, TFIM_CAVITY, TLS_CAVITY
from cavityaqc import ModelSpec, build_model
from cavityaqc import stationary as st_mod
from cavityaqc.errors import EmptyResult, InvalidInput
from cavityaqc.spectral import gap_location, xss_prime_fd
from cavityaqc.stationary import CavityParams, Control, Stability


class TestAlpha:
    @pytest.mark.parametrize(
        "cav, g2_ratio",
        [(TLS_CAVITY, 8.888888888889), (EC_CAVITY, 35.590277777778), (TFIM_CAVITY, 92.063492063492)],
    )
    def test_ratio(self, cav, g2_ratio):
        assert cav.alpha / cav.g**2 == pytest.approx(g2_ratio, rel=1e-12)

    def test_sign(self):
        assert st_mod.alpha(-0.1, 0.2) > 0 and st_mod.alpha(0.1, 0.2) < 0

    def test_zero_detuning(self):
        with pytest.raises(ZeroDivisionError):
            st_mod.alpha(0.0, 0.1)

    @given(st.floats(0.01, 2.0), st.floats(0.01, 1.0), st.sampled_from(["far", "near"]))
    def test_detuning_inverse(self, a_excess, kappa, branch):
        a = kappa / 2 + a_excess
        d = st_mod.detuning_for_alpha(a, kappa, branch)
        assert d < 0
        assert st_mod.alpha(d, kappa) == pytest.approx(a, rel=1e-9)
        assert (abs(d) >= kappa / 2) == (branch == "far") or abs(abs(d) - kappa / 2) < 1e-9

    def test_detuning_below_minimum(self):
        with pytest.raises(EmptyResult):
            st_mod.detuning_for_alpha(0.01, 0.1)

    def test_kappa_positive(self):
        with pytest.raises(InvalidInput):
            CavityParams(-0.1, 0.0, 0.1)


class TestStationaryPoints:
    def test_tls_low_drive_single_root_near_bx(self, tls_model):
        pts = st_mod.stationary_points(tls_model, TLS_CAVITY.with_control(Control.EPSILON, 0.07))
        assert len(pts) == 1
        assert pts[0].stability is Stability.STABLE
        assert pts[0].b_eff == pytest.approx(1.0, abs=0.01)

    @given(st.floats(0.0, 0.8))
    def test_residual_and_stability_rule(self, eps):
        model = build_model(ModelSpec("TLS", 1.0, 0.1))
        cav = TLS_CAVITY.with_control(Control.EPSILON, eps)
        for p in st_mod.stationary_points(model, cav):
            assert abs(cav.alpha * p.x_ss - eps + cav.g * model.x_ss(p.b_eff)) <= 1e-9
            assert p.b_eff == pytest.approx(model.b_x - cav.g * p.x_ss, abs=1e-12)
            slope = cav.alpha - cav.g**2 * xss_prime_fd(model, p.b_eff)
            assert (p.stability is Stability.UNSTABLE) == (slope < 0)

    @given(st.floats(0.0, 0.8))
    def test_stability_pattern_alternates(self, eps):
        model = build_model(ModelSpec("TLS", 1.0, 0.1))
        pts = st_mod.stationary_points(model, TLS_CAVITY.with_control(Control.EPSILON, eps))
        assert len(pts) in (1, 3)
        if len(pts) == 3:
            assert [p.stability for p in pts] == [Stability.STABLE, Stability.UNSTABLE, Stability.STABLE]

    def test_tfim_bistable_three_roots(self, tfim_model):
        pts = st_mod.stationary_points(tfim_model, TFIM_CAVITY.with_control(Control.EPSILON, 4.9))
        assert [p.stability for p in pts] == [Stability.STABLE, Stability.UNSTABLE, Stability.STABLE]

    def test_uncoupled(self, tls_model):
        cav = CavityParams(-0.05, 0.1, 0.0, epsilon=0.2)
        (p,) = st_mod.stationary_points(tls_model, cav)
        assert p.x_ss == pytest.approx(0.2 / cav.alpha) and p.b_eff == tls_model.b_x

    def test_positive_detuning_rejected(self, tls_model):
        with pytest.raises(InvalidInput):
            st_mod.stationary_points(tls_model, CavityParams(0.05, 0.1, 0.075, 0.3))

    def test_empty_in_narrow_bracket(self, tls_model):
        with pytest.raises(EmptyResult):
            st_mod.stationary_points(tls_model, TLS_CAVITY.with_control("epsilon", 0.07), x_range=(5.0, 6.0))

    def test_root_bracket_covers_unphysical_fields(self, tfim_model):
        # small alpha pushes the root beyond b = 0; it must still be found
        cav = CavityParams(-0.1, 0.12, 0.03, epsilon=5.0)
        pts = st_mod.stationary_points(tfim_model, cav)
        assert len(pts) == 1 and pts[0].b_eff < 0


class TestBifurcations:
    def test_tls_closed_form(self, tls_model):
        want = oracles.tls_bifurcations(1.0, 0.1, -0.05, 0.1, 0.075)
        got = st_mod.bifurcation_points(tls_model, TLS_CAVITY)
        assert len(got) == 2
        for p, (eps, b) in zip(got, want):
            assert p.control_value == pytest.approx(eps, abs=1e-7)
            assert p.b_eff == pytest.approx(b, abs=1e-7)

    def test_condition_holds(self, tfim_model):
        for p in st_mod.bifurcation_points(tfim_model, TFIM_CAVITY):
            assert xss_prime_fd(tfim_model, p.b_eff) == pytest.approx(TFIM_CAVITY.alpha / 0.03**2, rel=1e-8)

    def test_ec_brackets_gap(self, ec_model):
        pts = st_mod.bifurcation_points(ec_model, EC_CAVITY)
        b_gap = gap_location(ec_model).b_gap
        assert len(pts) == 2
        assert min(p.b_eff for p in pts) < b_gap < max(p.b_eff for p in pts)

    def test_detuning_turning_points_match_sweep(self, tfim_model):
        cav = TFIM_CAVITY.with_control(Control.EPSILON, 5.0)
        pts = st_mod.bifurcation_points(tfim_model, cav, Control.DELTA_C)
        d1, d2 = (p.control_value for p in pts)
        inside = st_mod.stationary_points(tfim_model, cav.with_control(Control.DELTA_C, 0.5 * (d1 + d2)))
        assert len(inside) == 3
        for d in (d1 - 1e-3, d2 + 1e-3):
            assert len(st_mod.stationary_points(tfim_model, cav.with_control(Control.DELTA_C, d))) == 1

    def test_uncoupled_has_none(self, tls_model):
        with pytest.raises(EmptyResult):
            st_mod.bifurcation_points(tls_model, CavityParams(-0.05, 0.1, 0.0))

    def test_no_window(self, tls_model):
        # alpha/g^2 above max X' = 20: monostable everywhere
        with pytest.raises(EmptyResult):
            st_mod.bifurcation_points(tls_model, CavityParams(-0.05, 0.1, 0.02))


class TestLinearization:
    @given(st.floats(-0.5, -0.01), st.floats(0.01, 0.5), st.floats(0.0, 0.2), st.floats(0.0, 200.0))
    def test_eigenvalues_are_secular_frequencies(self, d, kappa, g, xp):
        cav = CavityParams(d, kappa, g)
        ev = np.sort_complex(np.linalg.eigvals(st_mod.linearization_matrix(xp, cav)))
        want = np.sort_complex(np.array(st_mod.secular_frequencies(xp, cav)))
        np.testing.assert_allclose(ev, want, atol=1e-9)

    def test_zero_real_part_at_bifurcation(self):
        cav = TFIM_CAVITY
        w_plus, _ = st_mod.secular_frequencies(cav.alpha / cav.g**2, cav)
        assert abs(w_plus.real) <= 1e-12

    @given(st.floats(0.0, 200.0))
    def test_unstable_iff_positive_rate(self, xp):
        cav = TFIM_CAVITY
        w_plus, _ = st_mod.secular_frequencies(xp, cav)
        margin = cav.alpha - cav.g**2 * xp
        if abs(margin) > 1e-9:
            assert (w_plus.real > 0) == (margin < 0)


class TestSweep:
    def test_hysteresis(self, tls_model):
        rows = st_mod.sweep_control(tls_model, TLS_CAVITY, Control.EPSILON, 0.2, 0.5, 61)
        up = st_mod.follow_stable_branch(rows)
        down = st_mod.follow_stable_branch(rows, reverse=True)
        eps = np.array([r.control_value for r in rows])
        inside = (eps > 0.3131) & (eps < 0.3535)
        assert np.all(np.array(up)[inside] < np.array(down)[inside])
        outside = ~inside
        np.testing.assert_allclose(np.array(up)[outside], np.array(down)[outside])

    def test_bounds(self, tls_model):
        with pytest.raises(InvalidInput):
            st_mod.sweep_control(tls_model, TLS_CAVITY, "epsilon", 0.5, 0.2, 10)
        with pytest.raises(InvalidInput):
            st_mod.sweep_control(tls_model, TLS_CAVITY, "epsilon", 0.2, 0.5, 1)

    def test_uncoupled_straight_line(self, tls_model):
        cav = CavityParams(-0.05, 0.1, 0.0)
        rows = st_mod.sweep_control(tls_model, cav, "epsilon", 0.0, 1.0, 11)
        xs = [r.points[0].x_ss for r in rows]
        np.testing.assert_allclose(np.diff(xs), np.diff(xs)[0])


class TestFeasibility:
    @pytest.mark.parametrize("name", ["tls_model", "ec_model", "tfim_model"])
    def test_reference_parameter_sets_pass(self, name, request):
        model = request.getfixturevalue(name)
        cav = {"tls_model": TLS_CAVITY, "ec_model": EC_CAVITY, "tfim_model": TFIM_CAVITY}[name]
        assert st_mod.feasibility_check(model, cav).passed

    def test_positive_detuning_fails(self, tls_model):
        assert not st_mod.feasibility_check(tls_model, CavityParams(0.05, 0.1, 0.075)).passed

    def test_no_window_fails(self, tls_model):
        rep = st_mod.feasibility_check(tls_model, CavityParams(-0.05, 0.1, 0.02))
        assert not rep.bistable_window

    def test_max_derivative(self, tls_model):
        xp, b = st_mod.max_xss_prime(tls_model)
        assert xp == pytest.approx(20.0, abs=1e-6)
        assert b == pytest.approx(0.5, abs=1e-4)
