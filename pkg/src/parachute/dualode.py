"""Solution of the linear first-order ODE in slope space

    phi(d p) + (1 - d) p w'(p) - w(p) + c = 0,   p <= p_end < 0,   w(p_end) = w_end,

for d > 1, and its concave conjugate. Both the face-lift dual (phi = F*, c = m)
and the first-best dual (phi = F* - G*, c = 0) have this form.
"""
import numpy as np

from .errors import DomainError
from .numerics import find_root, integrate

TABLE_RATIO = 1.002


class LinearDualBranch:

    def __init__(self, phi, delta, const, p_end, w_end, quad_tol=1e-12):
        if delta <= 1:
            raise DomainError("the slope-space ODE branch needs delta > 1")
        if p_end >= 0:
            raise DomainError("p_end must be negative")
        self.phi = phi
        self.delta = float(delta)
        self.const = float(const)
        self.p_end = float(p_end)
        self.w_end = float(w_end)
        self.k = 1.0 / (1.0 - self.delta)
        self.quad_tol = quad_tol
        # table of nodes p_0 = p_end > p_1 > ... with J_i = int_{p_i}^{p_end} g
        self._p = [self.p_end]
        self._J = [0.0]
        self._w = []

    def _g(self, x):
        return self.phi(self.delta * x) / (-x) ** (1.0 + self.k)

    def _extend_to(self, p):
        while self._p[-1] > p:
            a = self._p[-1] * TABLE_RATIO
            self._J.append(self._J[-1] + integrate(self._g, a, self._p[-1], tol=self.quad_tol))
            self._p.append(a)

    def _J_at(self, p):
        self._extend_to(p)
        nodes = np.asarray(self._p)
        # nearest node at or above p (nodes are decreasing)
        i = int(np.searchsorted(-nodes, -p, side="right")) - 1
        i = max(i, 0)
        return self._J[i] + integrate(self._g, p, self._p[i], tol=self.quad_tol)

    def _value_scalar(self, p):
        if p > self.p_end:
            raise DomainError(f"slope {p} above branch end {self.p_end}")
        return self._combine(p, self._J_at(p))

    def _combine(self, p, J):
        ratio = (p / self.p_end) ** self.k
        return ((-p) ** self.k / (self.delta - 1.0) * J
                + self.const * (1.0 - ratio) + self.w_end * ratio)

    def value(self, p):
        p = np.asarray(p, dtype=float)
        out = np.vectorize(self._value_scalar, otypes=[float])(p)
        return out[()] if out.ndim == 0 else out

    def prime_from_value(self, p, w):
        p = np.asarray(p, dtype=float)
        return (w - self.phi(self.delta * p) - self.const) / ((1.0 - self.delta) * p)

    def prime(self, p):
        return self.prime_from_value(p, self.value(p))

    # -- conjugate ------------------------------------------------------------

    def _table(self, y_needed):
        while True:
            for i in range(len(self._w), len(self._p)):
                self._w.append(self._combine(self._p[i], self._J[i]))
            p, w = np.asarray(self._p), np.asarray(self._w)
            d = self.prime_from_value(p, w)
            if d[-1] >= y_needed:
                return p[::-1], w[::-1], d[::-1]
            self._extend_to(self._p[-1] * TABLE_RATIO ** 50)

    def conjugate(self, y):
        """inf_{p <= p_end} {y p - w(p)} and its minimiser, vectorised in y."""
        y = np.asarray(y, dtype=float)
        flat = np.atleast_1d(y).ravel()
        P, W, D = self._table(flat.max(initial=0.0))
        # ascending P, descending D
        idx = np.searchsorted(-D, -flat, side="left")
        at_end = idx >= P.size
        j = np.clip(idx - 1, 0, P.size - 2)
        p0, p1 = P[j], P[j + 1]
        w0, w1, d0, d1 = W[j], W[j + 1], D[j], D[j + 1]
        h = p1 - p0
        s = (w0 - w1) / h
        A = 6 * s + 3 * d0 + 3 * d1
        B = -6 * s - 4 * d0 - 2 * d1
        C = d0 - flat
        t_lin = np.clip(C / np.where(d0 > d1, d0 - d1, 1.0), 0.0, 1.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            disc = np.sqrt(np.maximum(B * B - 4 * A * C, 0.0))
            r1 = (-B + disc) / (2 * A)
            r2 = (-B - disc) / (2 * A)
        r1 = np.where(np.isfinite(r1), r1, t_lin)
        r2 = np.where(np.isfinite(r2), r2, t_lin)
        t = np.where(np.abs(r1 - t_lin) <= np.abs(r2 - t_lin), r1, r2)
        t = np.where(np.abs(A) < 1e-14 * (np.abs(B) + 1.0), t_lin, np.clip(t, 0.0, 1.0))
        t2, t3 = t * t, t * t * t
        H = ((2 * t3 - 3 * t2 + 1) * w0 + (t3 - 2 * t2 + t) * h * d0
             + (-2 * t3 + 3 * t2) * w1 + (t3 - t2) * h * d1)
        p = p0 + t * h
        val = flat * p - H
        end = at_end | (flat <= D[-1])
        p = np.where(end, self.p_end, p)
        val = np.where(end, flat * self.p_end - self.w_end, val)
        shape = np.shape(y)
        val, p = val.reshape(shape), p.reshape(shape)
        return (val[()], p[()]) if val.ndim == 0 else (val, p)

    def conjugate_exact(self, y):
        """Scalar conjugate via a root of w'(p) = y on the exact branch."""
        if y <= float(self.prime(self.p_end)):
            return y * self.p_end - self.w_end, self.p_end
        f = lambda p: float(self.prime(p)) - y
        lo = self.p_end * 2.0
        while f(lo) < 0:
            lo *= 2.0
        p = find_root(f, lo, self.p_end)
        return y * p - self._value_scalar(p), p
