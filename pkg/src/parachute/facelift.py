"""Face-lifted utility F-bar and its thresholds in every impatience regime."""
import numpy as np

from .dualode import LinearDualBranch
from .errors import DomainError, InvariantError, RegimeError
from .model import (F, F_delta_m, F_prime, F_star, F_star_inverse, Regime,
                    classify_regime)
from .numerics import bracket_outward, find_root


def _out(x):
    return x[()] if np.ndim(x) == 0 else x


def _decreasing_root(f, what, start=1.0, check_to=None):
    """Root of a function that is positive at 0 and decreases to -inf."""
    if f(0.0) <= 0:
        raise InvariantError(f"{what}: function not positive at 0")
    lo, hi = bracket_outward(f, 0.0, start) if f(start) > 0 else (0.0, start)
    root = find_root(f, lo, hi)
    ys = np.linspace(0.0, check_to or 2.0 * root, 257)
    vals = np.array([f(y) for y in ys])
    if np.any(np.diff(vals) > 1e-12 * (1.0 + np.abs(vals[1:]))):
        raise InvariantError(f"{what}: function is not decreasing on the sampled range")
    return root


class Facelift:
    """F-bar together with the thresholds that delimit its contact set."""

    def __init__(self, params):
        self.params = params
        self.regime = classify_regime(params)
        self.thresholds = {}
        self.branch = None
        d, m = params.delta, params.m
        reg = self.regime
        if reg is Regime.IMPATIENT_AGENT_LARGE_M:
            yb = self.y_bar()
            p_star = float(F_prime(yb, params))
            self.branch = LinearDualBranch(lambda x: F_star(x, params), d, m, p_star,
                                           float(F_star(p_star, params)))
            self.thresholds.update(y_bar=yb, p_star=p_star)
        elif reg is Regime.IMPATIENT_AGENT_SMALL_M:
            p_star = F_star_inverse(-m, params) / d
            self.branch = LinearDualBranch(lambda x: F_star(x, params), d, m, p_star, 0.0)
            self.thresholds.update(p_star=p_star)
        elif reg is Regime.DEGENERATE_PRINCIPAL:
            self.thresholds.update(y_hat=self.y_hat())
        elif reg is Regime.IMPATIENT_PRINCIPAL:
            self.thresholds.update(y_hat=self.y_hat(), y_bar=self.y_bar(), y_tilde=self.y_tilde())

    # -- thresholds -------------------------------------------------------------

    def y_bar(self):
        """Zero of F_delta_m, the end of the contact set when delta > 1."""
        p = self.params
        return _decreasing_root(lambda y: float(F_delta_m(y, p)), "F_delta_m")

    def y_bar_closed_form(self):
        p = self.params
        g, d = p.gamma, p.delta
        if p.shift:
            raise RegimeError("closed form needs the unshifted power utility")
        return (p.m / ((g - 1) * d ** (g / (g - 1)) - d * g + 1)) ** (1.0 / g)

    def y_hat(self):
        """First utility level at which F reaches -m."""
        p = self.params
        if p.delta >= 1:
            raise RegimeError("y_hat is defined for delta < 1")
        return _decreasing_root(lambda y: float(F(y, p)) + p.m, "F + m")

    def y_tilde(self):
        """Crossing point of F and w0 - m between y_hat and y_bar."""
        p = self.params
        if p.delta >= 1 or p.gamma * p.delta <= 1:
            raise RegimeError("y_tilde needs delta < 1 and gamma * delta > 1")
        chi = lambda y: float(F(y, p)) - float(self.w0(y)) + p.m
        return find_root(chi, self.y_hat(), self.y_bar())

    def y_tilde_closed_form(self):
        p = self.params
        g, d = p.gamma, p.delta
        inner = 1.0 - (1.0 / d) * ((g * d - 1) / (d * (g - 1))) ** (g - 1)
        return p.m ** (1.0 / g) * inner ** (-1.0 / g)

    @property
    def contact_end(self):
        """Right end of the contact set {F-bar = F}."""
        return {
            Regime.EQUALLY_IMPATIENT: np.inf,
            Regime.IMPATIENT_AGENT_LARGE_M: self.thresholds.get("y_bar"),
            Regime.IMPATIENT_AGENT_SMALL_M: 0.0,
            Regime.DEGENERATE_PRINCIPAL: self.thresholds.get("y_hat"),
            Regime.IMPATIENT_PRINCIPAL: self.thresholds.get("y_tilde"),
        }[self.regime]

    @property
    def kinks(self):
        end = self.contact_end
        return [] if end in (0.0, np.inf) else [end]

    # -- accident-free face-lift -------------------------------------------------

    def _w0_coef(self):
        p = self.params
        g, d = p.gamma, p.delta
        if g * d <= 1:
            raise RegimeError("w0 needs gamma * delta > 1")
        if p.shift:
            raise RegimeError("w0 has a closed form only for the unshifted power utility")
        return ((g * d - 1) / (g - 1)) ** (g - 1) / d ** g

    def w0(self, y):
        y = np.asarray(y, dtype=float)
        return _out(-self._w0_coef() * y ** self.params.gamma)

    def w0_prime(self, y):
        g = self.params.gamma
        y = np.asarray(y, dtype=float)
        return _out(-g * self._w0_coef() * y ** (g - 1))

    # -- dual of F-bar beyond the contact set (delta > 1) ------------------------

    def w_star(self, p):
        if self.branch is None:
            raise RegimeError("w* exists only for delta > 1")
        p = np.asarray(p, dtype=float)
        if np.any(p > self.branch.p_end):
            raise DomainError("slope above p*")
        return self.branch.value(p)

    def w_star_prime(self, p):
        if self.branch is None:
            raise RegimeError("w* exists only for delta > 1")
        return self.branch.prime(p)

    def w_star_closed_form(self, p):
        """Explicit dual for the unshifted power utility, large-m branch."""
        par = self.params
        if self.regime is not Regime.IMPATIENT_AGENT_LARGE_M or par.shift:
            raise RegimeError("closed form w* needs delta > 1 and power utility")
        g, d, m = par.gamma, par.delta, par.m
        p = np.asarray(p, dtype=float)
        q = g / (g - 1)
        c0 = (m / (1 - g * d + (g - 1) * d ** q)) ** ((g - 1) / (g * (d - 1)))
        term1 = -((-p) / g) ** (1.0 / (1.0 - d)) * c0 * m * g * (d - 1) / (g * d - 1)
        term2 = -(-p) ** q * (1 - g) ** 2 / (g * d - 1) * (d / g) ** q
        return _out(term1 + term2 + m)

    # -- evaluation ---------------------------------------------------------------

    def __call__(self, y):
        return self.eval(y)

    def eval(self, y):
        return self._eval(y)[0]

    def prime(self, y):
        """Derivative of F-bar; left derivative at a kink."""
        return self._eval(y)[1]

    def _eval(self, y):
        par = self.params
        y = np.asarray(y, dtype=float)
        if np.any(y < 0):
            raise DomainError("utility level must be non-negative")
        f = np.asarray(F(y, par), dtype=float)
        fp = np.asarray(F_prime(y, par), dtype=float)
        reg = self.regime
        if reg is Regime.EQUALLY_IMPATIENT:
            return _out(f), _out(fp)
        if reg is Regime.DEGENERATE_PRINCIPAL:
            inside = y <= self.thresholds["y_hat"]
            return _out(np.where(inside, f, -par.m)), _out(np.where(inside, fp, 0.0))
        if reg is Regime.IMPATIENT_PRINCIPAL:
            inside = y <= self.thresholds["y_tilde"]
            return (_out(np.where(inside, f, self.w0(y) - par.m)),
                    _out(np.where(inside, fp, self.w0_prime(y))))
        val, slope = self.branch.conjugate(y)
        val, slope = np.asarray(val), np.asarray(slope)
        if reg is Regime.IMPATIENT_AGENT_LARGE_M:
            inside = y <= self.thresholds["y_bar"]
            val, slope = np.where(inside, f, val), np.where(inside, fp, slope)
        return _out(val), _out(slope)

    # -- validation -----------------------------------------------------------------

    def hj_slots(self, y):
        """Both slots of min{F-bar - F, F*(d F-bar') - d y F-bar' + F-bar + m}."""
        par = self.params
        y = np.asarray(y, dtype=float)
        fb, fbp = self._eval(y)
        d = par.delta
        first = np.asarray(fb) - np.asarray(F(y, par))
        second = np.asarray(F_star(d * np.asarray(fbp), par)) - d * y * fbp + fb + par.m
        return _out(first), _out(second)

    def hj_residual(self, y, kink_band=0.0):
        """Residual of the face-lift HJ equation; NaN within ``kink_band`` of a kink."""
        first, second = self.hj_slots(y)
        res = np.minimum(first, second)
        y = np.asarray(y, dtype=float)
        for k in self.kinks:
            res = np.where(np.abs(y - k) <= kink_band, np.nan, res)
        return _out(res)
