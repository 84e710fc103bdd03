import math

import numpy as np
import pytest

from parachute.errors import DomainError, RegimeError
from parachute.facelift import Facelift
from parachute.model import F, F_delta_m, F_prime, F_star, ModelParams, Regime
from parachute.numerics import find_root

S6 = math.sqrt(6)


def params(delta, m=6.0, **kw):
    return ModelParams(r=0.1 * delta, rho=0.1, m=m, **kw)


REGIMES = {
    "equal": params(1.0),
    "large-m": params(2.0),
    "small-m": params(2.0, m=0.5, utility_kind="power-shifted"),
    "degenerate": params(0.4),
    "impatient-principal": params(0.75),
}


@pytest.fixture(scope="module")
def lifts():
    return {k: Facelift(p) for k, p in REGIMES.items()}


def test_regime_labels(lifts):
    assert lifts["equal"].regime is Regime.EQUALLY_IMPATIENT
    assert lifts["large-m"].regime is Regime.IMPATIENT_AGENT_LARGE_M
    assert lifts["small-m"].regime is Regime.IMPATIENT_AGENT_SMALL_M
    assert lifts["degenerate"].regime is Regime.DEGENERATE_PRINCIPAL
    assert lifts["impatient-principal"].regime is Regime.IMPATIENT_PRINCIPAL


class TestThresholds:
    def test_y_bar_delta_two(self, lifts):
        fl = lifts["large-m"]
        assert fl.y_bar() == pytest.approx(S6, abs=1e-10)
        assert fl.y_bar_closed_form() == pytest.approx(S6, abs=1e-12)

    def test_y_bar_delta_three_quarters(self, lifts):
        fl = lifts["impatient-principal"]
        assert fl.y_bar() == pytest.approx(fl.y_bar_closed_form(), abs=1e-8)
        assert fl.y_bar_closed_form() == pytest.approx(math.sqrt(6 / 0.0625), rel=1e-12)

    def test_y_bar_vanishes_with_m(self):
        assert Facelift(params(2.0, m=1e-10, eps_m=1e-10)).y_bar_closed_form() < 1e-4

    def test_y_hat(self, lifts):
        assert lifts["degenerate"].y_hat() == pytest.approx(S6)
        assert Facelift(params(0.4, m=0.25)).y_hat() == pytest.approx(0.5)
        fl = lifts["impatient-principal"]
        assert 0 < fl.y_hat() < fl.y_bar()

    def test_y_tilde(self, lifts):
        fl = lifts["impatient-principal"]
        assert fl.y_tilde_closed_form() == pytest.approx(3 * S6, rel=1e-12)
        assert fl.y_tilde() == pytest.approx(3 * S6, abs=1e-8)

    def test_y_tilde_root_oracle(self, lifts):
        fl = lifts["impatient-principal"]
        p = fl.params
        chi = lambda y: float(F(y, p)) - float(fl.w0(y)) + p.m
        assert find_root(chi, fl.y_hat(), fl.y_bar()) == pytest.approx(fl.y_tilde_closed_form(),
                                                                       abs=1e-8)

    def test_y_tilde_vanishes_with_m(self):
        assert Facelift(params(0.75, m=1e-10, eps_m=1e-10)).y_tilde_closed_form() < 1e-4

    def test_y_tilde_needs_nondegenerate(self, lifts):
        with pytest.raises(RegimeError):
            lifts["degenerate"].y_tilde()


class TestW0:
    def test_values(self, lifts):
        fl = lifts["impatient-principal"]
        assert fl.w0(0.0) == 0.0
        assert fl.w0(3.0) == pytest.approx(-8.0)

    def test_ode_residual(self, lifts, rng):
        # the accident-free face-lift ODE: F*(d w') - d y w' + w = 0
        fl = lifts["impatient-principal"]
        p = fl.params
        y = rng.uniform(0.01, 20, 100)
        wp = fl.w0_prime(y)
        res = F_star(p.delta * wp, p) - p.delta * y * wp + fl.w0(y)
        assert np.max(np.abs(res)) <= 1e-9 * max(1.0, np.max(np.abs(fl.w0(y))))


class TestWStar:
    def test_boundary_large_m(self, lifts):
        fl = lifts["large-m"]
        ps = fl.thresholds["p_star"]
        assert ps == pytest.approx(float(F_prime(S6, fl.params)))
        assert fl.w_star(ps) == pytest.approx(float(F_star(ps, fl.params)), abs=1e-12)

    def test_boundary_small_m(self, lifts):
        fl = lifts["small-m"]
        assert fl.w_star(fl.thresholds["p_star"]) == pytest.approx(0.0, abs=1e-12)

    def test_value_at_twice_p_star(self, lifts):
        # hand-integrated: (p w)' = 6 - p^2 with w(p*) = F*(p*) gives w(2p*) = -28
        fl = lifts["large-m"]
        ps = fl.thresholds["p_star"]
        assert fl.w_star(2 * ps) == pytest.approx(-28.0, rel=1e-10)
        assert fl.w_star_closed_form(2 * ps) == pytest.approx(-28.0, rel=1e-10)

    def test_closed_form_agreement(self, lifts):
        fl = lifts["large-m"]
        ps = np.linspace(10, 1.0001, 50) * fl.thresholds["p_star"]
        np.testing.assert_allclose(fl.w_star(ps), fl.w_star_closed_form(ps), rtol=1e-10)

    @pytest.mark.parametrize("key", ["large-m", "small-m"])
    def test_concave(self, lifts, key):
        fl = lifts[key]
        ps = fl.thresholds["p_star"] * np.linspace(20, 1, 500)
        w = fl.w_star(ps)
        assert np.all(np.diff(w, 2) < 0)

    def test_domain(self, lifts):
        fl = lifts["large-m"]
        with pytest.raises(DomainError):
            fl.w_star(0.0)
        with pytest.raises(RegimeError):
            lifts["equal"].w_star(-1.0)


class TestEval:
    @pytest.mark.parametrize("key", list(REGIMES))
    def test_zero_at_origin(self, lifts, key):
        assert lifts[key](0.0) == pytest.approx(0.0, abs=1e-12)

    def test_delta_one_is_F(self, lifts):
        y = np.linspace(0, 50, 1001)
        fl = lifts["equal"]
        assert np.array_equal(fl(y), F(y, fl.params))

    def test_impatient_principal_tail(self, lifts):
        assert lifts["impatient-principal"](8.0) == pytest.approx(-0.5 * (8 / 0.75) ** 2 - 6)
        assert lifts["impatient-principal"](8.0) == pytest.approx(-62.888888888888886)

    def test_degenerate_plateau(self, lifts):
        assert lifts["degenerate"](3.0) == pytest.approx(-6.0)

    def test_dominates_F(self, lifts):
        y = np.linspace(0, 30, 3001)
        for fl in lifts.values():
            assert np.all(fl(y) >= F(y, fl.params) - 1e-9)

    @pytest.mark.parametrize("key", list(REGIMES))
    def test_contact_set(self, lifts, key):
        fl = lifts[key]
        end = fl.contact_end
        gap = lambda y: float(fl(y) - F(y, fl.params))
        if end == np.inf:
            assert gap(40.0) == 0.0
            return
        if end > 0:
            assert gap(0.5 * end) == pytest.approx(0.0, abs=1e-12)
        assert gap(end * 1.01 + 1e-3) > 0

    def test_negative_input(self, lifts):
        with pytest.raises(DomainError):
            lifts["equal"](-1.0)


class TestHJ:
    @pytest.mark.parametrize("key", list(REGIMES))
    def test_residual_everywhere(self, lifts, key):
        fl = lifts[key]
        y = np.linspace(1e-3, 30, 1000)
        res = fl.hj_residual(y, kink_band=1e-3)
        res = res[np.isfinite(res)]
        assert res.size >= 990
        assert np.max(np.abs(res)) <= 1e-6

    def test_delta_one_first_slot(self, lifts):
        first, second = lifts["equal"].hj_slots(np.linspace(0, 10, 101))
        assert np.all(first == 0.0)

    def test_ode_slot_beyond_y_bar(self, lifts):
        fl = lifts["large-m"]
        _, second = fl.hj_slots(np.linspace(S6 + 0.01, 30, 400))
        assert np.max(np.abs(second)) <= 1e-6

    def test_contact_slots_delta_below_one(self, lifts):
        fl = lifts["impatient-principal"]
        y = np.linspace(0, fl.y_tilde() - 1e-3, 400)
        first, second = fl.hj_slots(y)
        assert np.all(first == 0.0)
        assert np.all(second >= -1e-9)
        assert np.all(F_delta_m(y, fl.params) >= -1e-9)
