"""Scalar numerics: root finding, quadrature, concave conjugation, interpolation."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize

from .errors import BracketError, DomainError, IntegrandError

ROOT_TOL = 1e-12
INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


def find_root(f, lo, hi, tol=ROOT_TOL, maxiter=500):
    """Brent root of ``f`` on ``[lo, hi]``; the bracket must change sign."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f={flo}, {fhi}")
    return float(_optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps,
                                  maxiter=maxiter))


def bracket_outward(f, near, far, grow=2.0, max_steps=400):
    """Move ``far`` away from ``near`` geometrically until ``f`` changes sign.

    Both points must share a sign (typically ``far = 2 * near``); returns an
    ordered bracket.
    """
    f_near = f(near)
    for _ in range(max_steps):
        f_far = f(far)
        if f_far == 0.0 or np.sign(f_far) != np.sign(f_near):
            return (far, near) if far < near else (near, far)
        near, f_near, far = far, f_far, far * grow
    raise BracketError(f"no sign change found beyond {near}")


def integrate(f, a, b, tol=1e-10, limit=400):
    """Adaptive quadrature of a scalar integrand on ``[a, b]``."""
    if a > b:
        raise DomainError(f"integration bounds out of order: {a} > {b}")
    if a == b:
        return 0.0

    def checked(x):
        fx = f(x)
        if not np.isfinite(fx):
            raise IntegrandError(f"non-finite integrand {fx} at x={x}")
        return fx

    val, _ = _integrate.quad(checked, a, b, epsabs=tol, epsrel=tol, limit=limit)
    return float(val)


@dataclass(frozen=True)
class GridFn:
    """Nodal values on a strictly increasing grid.

    ``extrapolate`` is one of ``clamp``, ``linear`` or ``error``. ``exact`` is an
    optional vectorised callable used to refine conjugates between nodes.
    """
    grid: np.ndarray
    values: np.ndarray
    extrapolate: str = "clamp"
    exact: Optional[Callable] = None

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.size == 0 or g.shape != v.shape:
            raise DomainError("grid and values must be 1-d arrays of equal length")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise DomainError("grid must be strictly increasing")
        if self.extrapolate not in ("clamp", "linear", "error"):
            raise DomainError(f"unknown extrapolation policy {self.extrapolate!r}")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)


def interp(fn, x):
    """Piecewise linear evaluation of ``fn`` honouring its extrapolation policy."""
    x = np.asarray(x, dtype=float)
    g, v = fn.grid, fn.values
    if fn.extrapolate == "error" and (np.any(x < g[0]) or np.any(x > g[-1])):
        raise DomainError("interpolation point outside the grid")
    out = np.interp(x, g, v)
    if fn.extrapolate == "linear" and g.size > 1:
        lo, hi = x < g[0], x > g[-1]
        out = np.where(lo, v[0] + (x - g[0]) * (v[1] - v[0]) / (g[1] - g[0]), out)
        out = np.where(hi, v[-1] + (x - g[-1]) * (v[-1] - v[-2]) / (g[-1] - g[-2]), out)
    return out[()] if out.ndim == 0 else out


def slope_grid(p_max, n=4000, p_min=1e-8, frac_geometric=0.5):
    """Slopes on ``[-p_max, 0]``: geometric near zero, linear in the tail."""
    n_geo = int(n * frac_geometric)
    knee = min(p_max / 10.0, 1.0) if p_max > p_min * 10 else p_max
    geo = -np.geomspace(p_min, knee, n_geo)
    lin = -np.linspace(knee, p_max, n - n_geo + 1)[1:]
    return np.concatenate([lin[::-1], geo[::-1], [0.0]])


def golden_min(f, lo, hi, tol=1e-12, maxiter=200):
    """Vectorised golden-section minimisation of ``f`` over elementwise brackets."""
    a = np.array(lo, dtype=float, copy=True)
    b = np.array(hi, dtype=float, copy=True)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(maxiter):
        if np.all(np.abs(b - a) <= tol * (1.0 + np.abs(a))):
            break
        left = fc < fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        nc = np.where(left, b - INV_PHI * (b - a), d)
        nd = np.where(left, c, a + INV_PHI * (b - a))
        fresh = f(np.where(left, nc, nd))
        fc, fd = np.where(left, fresh, fd), np.where(left, fc, fresh)
        c, d = nc, nd
    x = 0.5 * (a + b)
    return x, f(x)


def concave_conjugate(fn, y, chunk=512):
    """Concave conjugate ``inf_p {y p - fn(p)}`` of a function tabulated on slopes.

    The discrete minimiser over the nodes is refined by golden section between
    its neighbours, on ``fn.exact`` when given and on the linear interpolant
    otherwise.
    """
    p, f = fn.grid, fn.values
    if p.size == 0:
        raise DomainError("empty grid")
    y = np.asarray(y, dtype=float)
    flat = np.atleast_1d(y).ravel()
    idx = np.empty(flat.size, dtype=np.int64)
    for s in range(0, flat.size, chunk):
        block = flat[s:s + chunk, None] * p[None, :] - f[None, :]
        idx[s:s + chunk] = np.argmin(block, axis=1)
    best = flat * p[idx] - f[idx]
    if p.size > 1:
        lo = p[np.maximum(idx - 1, 0)]
        hi = p[np.minimum(idx + 1, p.size - 1)]
        exact = fn.exact if fn.exact is not None else (lambda q: np.interp(q, p, f))
        _, val = golden_min(lambda q: flat * q - exact(q), lo, hi)
        best = np.minimum(best, val)
    out = best.reshape(np.shape(y))
    return out[()] if out.ndim == 0 else out
