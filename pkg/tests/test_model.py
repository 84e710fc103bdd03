import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parachute.errors import ConfigError, DomainError, RegimeError
from parachute.model import (
    F, F_delta_m, F_prime, F_star, F_star_inverse, F_star_prime, G_star, G_star_closed_form,
    G_star_prime, ModelParams, Regime, argmax_agent, classify_regime, cost_maximisers,
    hamiltonian_agent, incentive_sensitivities, lambda_G,
)
from parachute.numerics import find_root


def pw(**kw):
    return ModelParams(**kw)


class TestParams:
    def test_delta_is_derived(self):
        assert pw(r=0.2, rho=0.1).delta == pytest.approx(2.0)

    @pytest.mark.parametrize("kw", [
        dict(r=0), dict(rho=-1), dict(gamma=1.0), dict(eps_m=0.2, m=0.1), dict(a_bar=0),
        dict(cost_kind="cubic"), dict(sigma=float("nan")), dict(reservation=-1),
    ])
    def test_rejects_bad_values(self, kw):
        with pytest.raises(ConfigError):
            pw(**kw)

    def test_replace_round_trip(self):
        p = pw(m=0.3)
        assert p.replace(m=0.2).m == 0.2
        assert ModelParams(**{k: v for k, v in p.to_dict().items() if k != "delta"}) == p


class TestUtility:
    def test_F_values(self):
        p = pw()
        assert F(0.0, p) == 0.0
        assert F(2.0, p) == pytest.approx(-4.0)
        assert F(math.sqrt(6), p) == pytest.approx(-6.0)

    def test_F_negative_argument(self):
        with pytest.raises(DomainError):
            F(-0.1, pw())

    def test_F_star_values(self):
        p = pw()
        assert F_star(1.0, p) == 0.0
        assert F_star(-2.0, p) == pytest.approx(-1.0)
        assert F_star(-4.0, p) == pytest.approx(-4.0)

    def test_F_star_prime_values(self):
        p = pw()
        assert F_star_prime(0.5, p) == 0.0
        assert F_star_prime(-2.0, p) == pytest.approx(1.0)
        assert F_star_prime(-0.2, p) == pytest.approx(0.1)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(1.2, 4.0), st.floats(-20, -1e-3))
    def test_fenchel_equality(self, gamma, q):
        # F*(q) = inf_y {qy - F(y)} is attained at y = (F*)'(q)
        p = pw(gamma=gamma)
        y = F_star_prime(q, p)
        assert F_star(q, p) == pytest.approx(q * y - F(y, p), rel=1e-10, abs=1e-12)
        assert F_prime(y, p) == pytest.approx(q, rel=1e-9)

    def test_F_star_inverse(self):
        p = pw()
        q = F_star_inverse(-3.0, p)
        assert F_star(q, p) == pytest.approx(-3.0)

    def test_shifted_utility_conjugate(self):
        p = pw(utility_kind="power-shifted")
        ys = np.linspace(0, 20, 200001)
        for q in (-5.0, -3.0, -2.5):
            brute = np.min(q * ys - F(ys, p))
            assert F_star(q, p) == pytest.approx(brute, abs=1e-6)


class TestFDeltaM:
    def test_at_zero(self):
        assert F_delta_m(0.0, pw(r=0.2, m=6)) == pytest.approx(6.0)

    def test_root_closed_form(self):
        p = pw(r=0.2, rho=0.1, m=6)
        assert F_delta_m(math.sqrt(6), p) == pytest.approx(0.0, abs=1e-12)

    def test_sign_change_delta_below_one(self):
        p = pw(r=0.075, rho=0.1, m=6)
        f = lambda y: float(F_delta_m(y, p))
        assert f(9.0) > 0 > f(10.0)
        assert find_root(f, 9.0, 10.0) == pytest.approx(math.sqrt(96), abs=1e-10)

    def test_undefined_for_delta_one(self):
        with pytest.raises(RegimeError):
            F_delta_m(1.0, pw())


class TestGStar:
    def test_at_zero(self, fb_params):
        assert G_star(0.0, fb_params) == pytest.approx(0.6 - 0.1)

    def test_far_left(self, fb_params):
        assert -0.3 - 1e-4 < G_star(-1e6, fb_params) < -0.3 + 1e-4

    def test_brute_force_value(self, fb_params):
        # sup over a 2001 x 2001 grid of [0, 0.6] x [0.1, 0.3]
        assert G_star(-0.05, fb_params) == pytest.approx(0.31045307096004765, abs=1e-9)

    def test_matches_closed_form(self, fb_params):
        ps = np.linspace(-3, 0.5, 701)
        np.testing.assert_allclose(G_star(ps, fb_params), G_star_closed_form(ps, fb_params),
                                   atol=1e-13)

    def test_shifted_cost_brute_force(self):
        p = pw(a_bar=4.6, m=0.3)
        a = np.linspace(0, 4.6, 4001)[:, None]
        b = np.linspace(0.1, 0.3, 4001)[None, :]
        for s in (-0.05, -0.5, -3.0):
            brute = np.max(a + s * (a * a / 2 + 0.4 * a)) + np.max(-b + s * (1 / b - 1 / 0.3))
            assert G_star(s, p) == pytest.approx(brute, abs=1e-5)

    def test_monotone_convex_and_bounded(self, fb_params):
        ps = np.linspace(-20, 0, 1000)
        g = G_star(ps, fb_params)
        assert np.all(np.diff(g) >= -1e-14)
        assert np.all(np.diff(g, 2) >= -1e-12)
        assert np.all((g >= -0.3 - 1e-12) & (g <= 0.5 + 1e-12))

    def test_envelope_derivative(self, fb_params):
        for s in (-2.0, -0.5, -0.05):
            h = 1e-6
            fd = (G_star(s + h, fb_params) - G_star(s - h, fb_params)) / (2 * h)
            assert G_star_prime(s, fb_params) == pytest.approx(fd, rel=1e-6)

    def test_maximisers_in_box(self, fb_params):
        a, b = cost_maximisers(np.linspace(-5, 1, 50), fb_params)
        assert np.all((a >= 0) & (a <= 0.6) & (b >= 0.1) & (b <= 0.3))


class TestLambdaG:
    def test_value_against_bisection(self, fb_params):
        # bisection on the closed form to machine precision
        assert lambda_G(fb_params) == pytest.approx(-1.6666666666666667, abs=1e-10)

    def test_is_a_root(self, fb_params):
        lg = lambda_G(fb_params)
        assert G_star(lg - 1, fb_params) < 0 < G_star(lg + 1e-6, fb_params)

    def test_monotone_in_a_bar(self, fb_params):
        assert lambda_G(fb_params.replace(a_bar=0.8)) <= lambda_G(fb_params)


class TestAgent:
    def test_hamiltonian_zero_effort(self, rng):
        p = pw(m=0.3)
        for z, U in rng.normal(size=(5, 2)):
            assert hamiltonian_agent(z, U, 0.0, 0.3, p) == pytest.approx(0.0)

    def test_hamiltonian_value(self):
        p = pw(m=0.3)
        assert hamiltonian_agent(1.0, 0.0, 0.6, 0.3, p) == pytest.approx(0.18)

    def test_hamiltonian_box(self):
        with pytest.raises(DomainError):
            hamiltonian_agent(1.0, 0.0, 5.0, 0.3, pw(m=0.3))

    def test_argmax_beats_random_search(self, rng):
        p = pw(m=0.3)
        a = rng.uniform(0, 4.6, 10_000)
        b = rng.uniform(0.1, 0.3, 10_000)
        for z, U in [(1.0, -0.5), (0.2, -3.0), (3.0, 0.4), (0.0, -0.3)]:
            a_s, b_s = argmax_agent(z, U, p)
            best = hamiltonian_agent(z, U, a_s, b_s, p)
            assert best >= np.max(hamiltonian_agent(z, U, a, b, p)) - 1e-12

    def test_argmax_simple_cases(self):
        p = pw(m=0.3)
        assert argmax_agent(0.0, 0.0, p) == pytest.approx((0.0, 0.3))
        assert argmax_agent(1.0, 0.0, p) == pytest.approx((0.6, 0.3))

    def test_argmax_grid_search(self):
        p = pw(m=0.3)
        a = np.linspace(0, 4.6, 101)[:, None]
        b = np.linspace(0.1, 0.3, 101)[None, :]
        vals = hamiltonian_agent(0.0, -0.3, a + 0 * b, b + 0 * a, p)
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        a_s, b_s = argmax_agent(0.0, -0.3, p)
        assert a_s == pytest.approx(0.0)
        assert b_s == pytest.approx(b[0, j], abs=0.002)
        assert b_s == pytest.approx(math.sqrt(0.3), abs=1e-12) or b_s == 0.3

    def test_sensitivities(self):
        p = pw(m=0.3)
        assert incentive_sensitivities(0.0, 0.3, p) == pytest.approx((0.4, -1 / 0.3))
        assert incentive_sensitivities(1.0, 0.1, p)[1] == pytest.approx(-0.3 / 0.01)

    @settings(max_examples=80, deadline=None)
    @given(st.floats(0.01, 4.5), st.floats(0.101, 0.299))
    def test_sensitivity_round_trip(self, a, b):
        p = pw(m=0.3)
        z, U = incentive_sensitivities(a, b, p)
        a2, b2 = argmax_agent(z, U, p)
        assert a2 == pytest.approx(a, abs=1e-10)
        assert b2 == pytest.approx(b, abs=1e-10)


class TestRegimes:
    @pytest.mark.parametrize("r,expected", [
        (0.1, Regime.EQUALLY_IMPATIENT),
        (0.04, Regime.DEGENERATE_PRINCIPAL),
        (0.075, Regime.IMPATIENT_PRINCIPAL),
        (0.2, Regime.IMPATIENT_AGENT_LARGE_M),
    ])
    def test_classification(self, r, expected):
        assert classify_regime(pw(r=r, rho=0.1, m=6)) is expected

    def test_small_m(self):
        # F_delta_m has no positive root when its leading coefficient is positive
        assert classify_regime(pw(r=0.4, rho=0.1, m=6)) in (
            Regime.IMPATIENT_AGENT_SMALL_M, Regime.IMPATIENT_AGENT_LARGE_M)
