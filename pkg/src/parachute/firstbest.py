"""First-best value function (effort observable) in every tractable regime."""
import numpy as np
from scipy import integrate as _integrate

from .dualode import LinearDualBranch
from .errors import RegimeError
from .facelift import Facelift
from .model import (F, F_prime, F_star, F_star_prime, G_star, G_star_prime, Regime,
                    classify_regime, lambda_G)
from .numerics import find_root, golden_min

V0_ZERO_TOL = 1e-8
DISCOUNT_CUTOFF = 1e-12


def _out(x):
    return x[()] if np.ndim(x) == 0 else x


class FirstBest:
    """Holds the first-best thresholds and evaluates v^FB.

    ``n_lambda`` and ``n_T`` size the grids of the inf-sup defining v^FB(0)
    when delta > 1.
    """

    def __init__(self, params, n_lambda=2000, n_T=400):
        self.params = params
        self.regime = classify_regime(params)
        self.facelift = Facelift(params)
        self.lambda_G = lambda_G(params)
        lg = self.lambda_G
        self.y_Fstar = float(F_star_prime(lg, params))
        self.y_FstarGstar = self.y_Fstar - float(G_star_prime(lg, params))
        self.v0 = None
        self.lambda0_star = None
        self.branch = None
        self.n_lambda, self.n_T = n_lambda, n_T
        reg = self.regime
        if reg is Regime.DEGENERATE_PRINCIPAL:
            self.v0 = params.a_bar - params.eps_m
        elif reg is Regime.EQUALLY_IMPATIENT:
            self.v0 = float(self.vfb_delta1(0.0))
            self.lambda0_star = float(self.vfb_delta1_prime(0.0))
        elif reg in (Regime.IMPATIENT_AGENT_LARGE_M, Regime.IMPATIENT_AGENT_SMALL_M):
            self.v0, self.lambda0_star = self._v0_inf_sup()
            if self.v0 > V0_ZERO_TOL:
                phi = lambda x: F_star(x, params) - G_star(x, params)
                self.branch = LinearDualBranch(phi, params.delta, 0.0, self.lambda0_star, -self.v0)

    @property
    def v0_is_zero(self):
        return self.v0 is not None and abs(self.v0) < V0_ZERO_TOL

    def summary(self):
        return {
            "regime": self.regime.value,
            "lambda_G": self.lambda_G,
            "y_Fstar": self.y_Fstar,
            "y_FstarGstar": self.y_FstarGstar,
            "v0": self.v0,
            "lambda0_star": self.lambda0_star,
        }

    # -- delta = 1 ----------------------------------------------------------------

    def _delta1_slope(self, y):
        """Minimiser of l y - F*(l) + G*(l) on [lambda_G, 0] for y < y^{F*,G*}."""
        par = self.params
        f = lambda lam: y - float(F_star_prime(lam, par)) + float(G_star_prime(lam, par))
        lo, hi = self.lambda_G, 0.0
        if f(hi) <= 0:
            return hi
        return find_root(f, lo, hi)

    def vfb_delta1(self, y):
        par = self.params
        if self.regime is not Regime.EQUALLY_IMPATIENT:
            raise RegimeError("vfb_delta1 requires delta = 1")
        y = np.asarray(y, dtype=float)
        fy = np.asarray(F(y, par), dtype=float)
        lg = self.lambda_G
        if lg >= float(F_prime(0.0, par)):
            return _out(fy)
        head = y < self.y_FstarGstar
        out = np.where(y < self.y_Fstar, y * lg - float(F_star(lg, par)), fy)
        if np.any(head):
            lam = np.array([self._delta1_slope(v) for v in y[head]])
            out[head] = y[head] * lam - F_star(lam, par) + G_star(lam, par)
        return _out(out)

    def vfb_delta1_prime(self, y):
        par = self.params
        y = np.asarray(y, dtype=float)
        fp = np.asarray(F_prime(y, par), dtype=float)
        out = np.where(y < self.y_Fstar, self.lambda_G, fp)
        head = y < self.y_FstarGstar
        if np.any(head):
            out[head] = [self._delta1_slope(v) for v in y[head]]
        return _out(out)

    # -- delta > 1: initial value ------------------------------------------------

    def _T_grid(self, n):
        rho = self.params.rho
        T_max = -np.log(DISCOUNT_CUTOFF) / rho
        return np.concatenate([[0.0], np.geomspace(1e-5 / rho, T_max, n)])

    def _sup_T(self, lams, n):
        """sup over T in [0, inf] of the first-best initial-value functional.

        The time integral is a cumulative Simpson sum on a geometric grid of
        ``n`` nodes; the sup is refined by a parabola through the best node.
        The T = inf candidate is the full integral (tail below the cutoff).
        """
        par = self.params
        rho, d = par.rho, par.delta
        T = self._T_grid(n)
        s = T[None, :]
        lams = np.asarray(lams, dtype=float)[:, None]
        x = lams * np.exp(rho * (1 - d) * s)
        integrand = rho * np.exp(-rho * s) * (G_star(d * x, par) - F_star(d * x, par))
        cum = _integrate.cumulative_simpson(integrand, x=T, axis=1, initial=0.0)
        vals = -np.exp(-rho * s) * F_star(x, par) + cum
        i = np.argmax(vals, axis=1)
        rows = np.arange(vals.shape[0])
        best = vals[rows, i]
        inner = (i > 0) & (i < T.size - 1)
        if np.any(inner):
            j = np.clip(i, 1, T.size - 2)
            t0, t1, t2 = T[j - 1], T[j], T[j + 1]
            f0, f1, f2 = vals[rows, j - 1], vals[rows, j], vals[rows, j + 1]
            # vertex of the interpolating parabola
            den = (t1 - t0) * (f1 - f2) - (t1 - t2) * (f1 - f0)
            num = (t1 - t0) ** 2 * (f1 - f2) - (t1 - t2) ** 2 * (f1 - f0)
            with np.errstate(divide="ignore", invalid="ignore"):
                tv = t1 - 0.5 * num / den
                a_ = ((f2 - f1) / (t2 - t1) - (f1 - f0) / (t1 - t0)) / (t2 - t0)
                peak = f1 - a_ * (tv - t1) ** 2
            ok = inner & np.isfinite(peak) & (a_ < 0) & (tv > t0) & (tv < t2)
            best = np.where(ok, np.maximum(best, peak), best)
        return np.maximum(best, cum[:, -1])

    def _lambda_grid(self):
        scale = max(4.0 * abs(self.lambda_G), 1.0)
        return -np.geomspace(1e-6 * scale, scale, self.n_lambda)[::-1]

    def _v0_inf_sup(self):
        lams = self._lambda_grid()
        vals = np.concatenate([self._sup_T(lams[k:k + 250], 8 * self.n_T)
                               for k in range(0, lams.size, 250)])
        i = int(np.argmin(vals))
        if i == 0:
            raise RegimeError("inf over lambda sits on the grid boundary")
        lo, hi = lams[i - 1], lams[min(i + 1, lams.size - 1)]
        lam, val = golden_min(lambda l: self._sup_T(l, 100 * self.n_T),
                              np.array([lo]), np.array([hi]), tol=1e-10)
        return float(val[0]), float(lam[0])

    def v0_fb(self):
        return self.v0

    # -- delta > 1: dual --------------------------------------------------------------

    def vfb_star(self, p):
        if self.branch is None:
            raise RegimeError("v^FB,* needs delta > 1 and v0 > 0")
        return self.branch.value(p)

    # -- dispatch ------------------------------------------------------------------------

    def __call__(self, y):
        return self.eval(y)

    def eval(self, y):
        par = self.params
        y = np.asarray(y, dtype=float)
        reg = self.regime
        if reg is Regime.DEGENERATE_PRINCIPAL:
            return _out(np.full(y.shape, par.a_bar - par.eps_m))
        if reg is Regime.EQUALLY_IMPATIENT:
            return self.vfb_delta1(y)
        if reg is Regime.IMPATIENT_PRINCIPAL:
            raise RegimeError("first best with delta < 1 and gamma * delta > 1 is not supported")
        if self.branch is None:
            return self.facelift(y)
        return self.branch.conjugate(y)[0]
