import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parachute.errors import BracketError, DomainError, IntegrandError
from parachute.model import F, F_delta_m, F_star, G_star, ModelParams
from parachute.numerics import (
    GridFn, bracket_outward, concave_conjugate, find_root, golden_min, integrate, interp,
    slope_grid,
)


class TestFindRoot:
    def test_linear(self):
        assert find_root(lambda x: x - 1, 0, 2) == pytest.approx(1.0, abs=1e-12)

    def test_face_lift_threshold(self):
        p = ModelParams(r=0.2, rho=0.1, m=6)
        y = find_root(lambda y: float(F_delta_m(y, p)), 0, 10)
        assert y == pytest.approx(math.sqrt(6), abs=1e-10)

    def test_lambda_G_against_bisection(self, fb_params):
        g = lambda s: float(G_star(s, fb_params))
        lo, hi = -10.0, 0.0
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if g(mid) < 0 else (lo, mid)
        assert find_root(g, -10, 0) == pytest.approx(hi, abs=1e-10)

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            find_root(lambda x: x * x + 1, -1, 1)

    def test_endpoint_root(self):
        assert find_root(lambda x: x, 0.0, 1.0) == 0.0

    def test_bracket_outward(self):
        lo, hi = bracket_outward(lambda x: 50 - x, 1.0, 2.0)
        assert (50 - lo) * (50 - hi) <= 0

    def test_bracket_outward_gives_up(self):
        with pytest.raises(BracketError):
            bracket_outward(lambda x: 1.0, 1.0, 2.0, max_steps=10)


class TestIntegrate:
    def test_polynomials(self):
        assert integrate(lambda x: x, 0, 1) == pytest.approx(0.5)
        assert integrate(lambda x: x ** 3, 0, 1) == pytest.approx(0.25, abs=1e-10)

    def test_against_trapezoid(self):
        # the slope-space integral behind the face-lift dual, checked on 10^6 panels
        p = ModelParams(r=0.2, rho=0.1, m=6)
        d = p.delta
        k = 1 / (1 - d)
        p_star = -2 * math.sqrt(6)
        g = lambda x: F_star(d * x, p) / (-x) ** (1 + k)
        val = integrate(g, 2 * p_star, p_star)
        assert val == pytest.approx(-274.34285119173813, rel=1e-9)
        assert val == pytest.approx(-112 * math.sqrt(6), rel=1e-12)

    def test_bad_order(self):
        with pytest.raises(DomainError):
            integrate(lambda x: x, 1, 0)

    def test_non_finite(self):
        with pytest.raises(IntegrandError):
            integrate(lambda x: math.inf if x > 0.5 else 0.0, 0, 1)


class TestInterp:
    def test_nodes_and_midpoints(self):
        fn = GridFn(np.array([0.0, 1.0, 3.0]), np.array([1.0, 3.0, -1.0]))
        assert interp(fn, 1.0) == 3.0
        assert interp(fn, 2.0) == pytest.approx(1.0)

    def test_extrapolation(self):
        g, v = np.array([0.0, 1.0]), np.array([0.0, 2.0])
        assert interp(GridFn(g, v, "clamp"), 3.0) == 2.0
        assert interp(GridFn(g, v, "linear"), 3.0) == pytest.approx(6.0)
        with pytest.raises(DomainError):
            interp(GridFn(g, v, "error"), 3.0)

    def test_invalid_grid(self):
        with pytest.raises(DomainError):
            GridFn(np.array([0.0, 0.0]), np.array([1.0, 2.0]))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(3, 40), st.integers(0, 10_000))
    def test_concave_samples(self, n, seed):
        rng = np.random.default_rng(seed)
        g = np.sort(rng.uniform(0, 10, n))
        g = np.unique(g)
        if g.size < 3:
            return
        v = -(g - rng.uniform(0, 10)) ** 2
        fn = GridFn(g, v)
        x = rng.uniform(g[0], g[-1], 50)
        y = interp(fn, x)
        i = np.clip(np.searchsorted(g, x) - 1, 0, g.size - 2)
        lo = np.minimum(v[i], v[i + 1])
        hi = np.maximum(v[i], v[i + 1])
        assert np.all(y >= lo - 1e-12) and np.all(y <= hi + 1e-12)


class TestConjugate:
    def test_biconjugate_power(self):
        p = ModelParams()
        s = slope_grid(10.0, 4000)
        fn = GridFn(s, F_star(s, p), exact=lambda q: F_star(q, p))
        assert concave_conjugate(fn, 1.0) == pytest.approx(-1.0, abs=1e-5)

    def test_biconjugate_without_exact(self):
        p = ModelParams()
        s = slope_grid(10.0, 4000)
        ys = np.linspace(0.05, 4.5, 30)
        out = concave_conjugate(GridFn(s, F_star(s, p)), ys)
        np.testing.assert_allclose(out, F(ys, p), atol=1e-5)

    def test_zero_function(self):
        fn = GridFn(np.linspace(-1, 0, 11), np.zeros(11))
        assert concave_conjugate(fn, 0.0) == pytest.approx(0.0)

    def test_monotone(self):
        p = ModelParams(gamma=3.0)
        s = slope_grid(20.0, 1000)
        out = concave_conjugate(GridFn(s, F_star(s, p)), np.linspace(0, 5, 200))
        assert np.all(np.diff(out) <= 1e-14)


def test_slope_grid_shape():
    s = slope_grid(5.0, 1000)
    # n interior slopes plus the closing zero
    assert s.size == 1001
    assert np.all(np.diff(s) > 0) and s[0] == -5.0 and s[-1] == 0.0


def test_golden_min_vectorised():
    centres = np.array([0.3, -1.2, 2.5])
    x, f = golden_min(lambda x: (x - centres) ** 2 + 1, centres - 3, centres + 2)
    np.testing.assert_allclose(x, centres, atol=1e-8)
    np.testing.assert_allclose(f, 1.0)
