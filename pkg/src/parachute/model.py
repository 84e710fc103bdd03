"""Model primitives: parameters, the agent's utility dual pair, effort costs and
their dual, the agent Hamiltonian and the regime classifier."""
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError, RegimeError
from .numerics import bracket_outward, find_root

COST_KINDS = {"quadratic": 0.0, "quadratic-shifted": 0.4}
UTILITY_KINDS = ("power", "power-shifted")
DELTA_ONE_TOL = 1e-12


class Regime(str, Enum):
    EQUALLY_IMPATIENT = "equally-impatient"
    IMPATIENT_AGENT_SMALL_M = "impatient-agent-small-m"
    IMPATIENT_AGENT_LARGE_M = "impatient-agent-large-m"
    DEGENERATE_PRINCIPAL = "degenerate-principal"
    IMPATIENT_PRINCIPAL = "impatient-principal-nondegenerate"


@dataclass(frozen=True)
class ModelParams:
    """Scalar primitives of the contracting problem.

    ``cost_kind`` picks the drift cost: ``quadratic`` is a^2/2 and
    ``quadratic-shifted`` is a^2/2 + 2a/5. The intensity cost is always
    1/b - 1/m. ``utility_kind="power-shifted"`` swaps F(y) = -y^g for
    -y^g - g*y and is experimental (face-lift only).
    """
    r: float = 0.1
    rho: float = 0.1
    sigma: float = 1.0
    gamma: float = 2.0
    m: float = 0.1
    eps_m: float = 0.1
    a_bar: float = 4.6
    reservation: float = 0.0
    cost_kind: str = "quadratic-shifted"
    utility_kind: str = "power"
    delta: float = field(init=False)

    def __post_init__(self):
        for name in ("r", "rho", "sigma", "gamma", "m", "eps_m", "a_bar", "reservation"):
            val = getattr(self, name)
            if not isinstance(val, (int, float)) or not np.isfinite(val):
                raise ConfigError(f"{name} must be a finite number, got {val!r}")
        if self.r <= 0 or self.rho <= 0:
            raise ConfigError("r and rho must be positive")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        if self.gamma <= 1:
            raise ConfigError("gamma must exceed 1")
        if not 0 < self.eps_m <= self.m:
            raise ConfigError("need 0 < eps_m <= m")
        if self.a_bar <= 0:
            raise ConfigError("a_bar must be positive")
        if self.reservation < 0:
            raise ConfigError("reservation utility must be non-negative")
        if self.cost_kind not in COST_KINDS:
            raise ConfigError(f"cost_kind must be one of {sorted(COST_KINDS)}")
        if self.utility_kind not in UTILITY_KINDS:
            raise ConfigError(f"utility_kind must be one of {list(UTILITY_KINDS)}")
        object.__setattr__(self, "delta", self.r / self.rho)

    @property
    def kappa(self):
        """Linear coefficient of the drift cost."""
        return COST_KINDS[self.cost_kind]

    @property
    def shift(self):
        """Linear coefficient subtracted from the power utility cost."""
        return self.gamma if self.utility_kind == "power-shifted" else 0.0

    def replace(self, **changes):
        d = {k: v for k, v in asdict(self).items() if k != "delta"}
        d.update(changes)
        return ModelParams(**d)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class DualPair:
    """A concave function and its concave conjugate, with derivatives."""
    f: Callable
    f_prime: Callable
    f_star: Callable
    f_star_prime: Callable


def _nonneg(y):
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(np.isnan(y)):
        raise DomainError("utility level must be non-negative")
    return y


def _out(x):
    return x[()] if np.ndim(x) == 0 else x


# -- power utility, optionally shifted by -g*y --------------------------------

def F(y, params):
    y = _nonneg(y)
    g = params.gamma
    return _out(-y ** g - params.shift * y)


def F_prime(y, params):
    y = _nonneg(y)
    g = params.gamma
    return _out(-g * y ** (g - 1) - params.shift)


def F_star(p, params):
    """Concave conjugate inf_{y>=0} {y p - F(y)}."""
    g = params.gamma
    q = np.minimum(np.asarray(p, dtype=float) + params.shift, 0.0)
    return _out(-(g - 1) * (-q / g) ** (g / (g - 1)))


def F_star_prime(p, params):
    """Minimiser y*(p) of y p - F(y) over y >= 0."""
    g = params.gamma
    q = np.minimum(np.asarray(p, dtype=float) + params.shift, 0.0)
    return _out((-q / g) ** (1.0 / (g - 1)))


def F_star_inverse(value, params):
    """Slope p <= F'(0) with F*(p) = value (value <= 0)."""
    if value > 0:
        raise DomainError("F* takes only non-positive values")
    g = params.gamma
    q = -g * (-value / (g - 1)) ** ((g - 1) / g)
    return q - params.shift


def utility_pair(params):
    return DualPair(
        f=lambda y: F(y, params),
        f_prime=lambda y: F_prime(y, params),
        f_star=lambda p: F_star(p, params),
        f_star_prime=lambda p: F_star_prime(p, params),
    )


def F_delta_m(y, params):
    """F*(dF'(y)) - d y F'(y) + F(y) + m; only meaningful when d != 1."""
    d = params.delta
    if abs(d - 1.0) <= DELTA_ONE_TOL:
        raise RegimeError("F_delta_m is not used when delta = 1")
    fp = F_prime(y, params)
    return _out(F_star(d * fp, params) - d * np.asarray(y) * fp + F(y, params) + params.m)


# -- costs ---------------------------------------------------------------------

def h_a(a, params):
    a = np.asarray(a, dtype=float)
    return _out(0.5 * a * a + params.kappa * a)


def h_a_prime(a, params):
    return _out(np.asarray(a, dtype=float) + params.kappa)


def h_b(b, params):
    b = np.asarray(b, dtype=float)
    return _out(1.0 / b - 1.0 / params.m)


def h_b_prime(b, params):
    b = np.asarray(b, dtype=float)
    return _out(-1.0 / (b * b))


def cost(a, b, params):
    return _out(np.asarray(h_a(a, params)) + np.asarray(h_b(b, params)))


def _check_box(a, b, params, tol=1e-12):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(a < -tol) or np.any(a > params.a_bar + tol):
        raise DomainError(f"effort outside [0, {params.a_bar}]")
    if np.any(b < params.eps_m - tol) or np.any(b > params.m + tol):
        raise DomainError(f"intensity outside [{params.eps_m}, {params.m}]")
    return a, b


def cost_maximisers(p, params):
    """Maximisers (a*, b*) of a - b + p h(a, b) over the control box."""
    p = np.asarray(p, dtype=float)
    neg = p < 0
    safe = np.where(neg, p, -1.0)
    a_int = -(1.0 + params.kappa * safe) / safe
    a = np.where(neg, np.clip(a_int, 0.0, params.a_bar), params.a_bar)
    b = np.where(neg, np.clip(np.sqrt(-safe), params.eps_m, params.m), params.eps_m)
    return _out(a), _out(b)


def G_star(p, params):
    """Convex dual sup_{(a,b)} {a - b + p h(a,b)} of the cost."""
    a, b = cost_maximisers(p, params)
    return _out(np.asarray(a) - b + np.asarray(p) * np.asarray(cost(a, b, params)))


def G_star_prime(p, params):
    """Derivative of G*, equal to h at the maximisers (envelope theorem)."""
    a, b = cost_maximisers(p, params)
    return cost(a, b, params)


def G_star_closed_form(p, params):
    """Three-branch formulas for the unshifted quadratic drift cost."""
    if params.cost_kind != "quadratic":
        raise RegimeError("closed form G* requires cost_kind='quadratic'")
    p = np.asarray(p, dtype=float)
    ab, m, e = params.a_bar, params.m, params.eps_m
    with np.errstate(divide="ignore", invalid="ignore"):
        ga = np.where(p <= -1.0 / ab, -1.0 / (2.0 * p), ab * (1.0 + ab * p / 2.0))
        s = np.sqrt(np.maximum(-p, 0.0))
        gb = np.where(p <= -m * m, -m,
                      np.where(p < -e * e, -(2.0 * m - s) * s / m, -(e + (1.0 / m - 1.0 / e) * p)))
    return _out(ga + gb)


def lambda_G(params):
    """Largest-magnitude slope at which G* vanishes: the root of G* on (-inf, 0)."""
    g = lambda p: float(G_star(p, params))
    if g(0.0) < 0:
        raise RegimeError("G*(0) < 0: no root on (-inf, 0]")
    near = -1e-6
    if g(near) < 0:
        return find_root(g, near, 0.0)
    lo, hi = bracket_outward(g, near, 2 * near)
    return find_root(g, lo, hi)


# -- agent ---------------------------------------------------------------------

def hamiltonian_agent(z, U, a, b, params):
    """a z - ((m - b)/m) U - h(a, b) under the point-mass jump law."""
    a, b = _check_box(a, b, params)
    m = params.m
    return _out(a * np.asarray(z) - (m - b) / m * np.asarray(U) - np.asarray(cost(a, b, params)))


def argmax_agent(z, U, params):
    """Agent's best response (a*, b*) to sensitivities (z, U)."""
    z = np.asarray(z, dtype=float)
    U = np.asarray(U, dtype=float)
    a = np.clip(z - params.kappa, 0.0, params.a_bar)
    neg = U < 0
    b_int = np.sqrt(-params.m / np.where(neg, U, -1.0))
    b = np.where(neg, np.clip(b_int, params.eps_m, params.m), params.m)
    return _out(a), _out(b)


def incentive_sensitivities(a, b, params):
    """First-order inversion of ``argmax_agent``: z = dh/da, U = m dh/db."""
    a, b = _check_box(a, b, params)
    return h_a_prime(a, params), _out(params.m * np.asarray(h_b_prime(b, params)))


def classify_regime(params):
    d, g = params.delta, params.gamma
    if abs(d - 1.0) <= DELTA_ONE_TOL:
        return Regime.EQUALLY_IMPATIENT
    if g * d <= 1.0:
        return Regime.DEGENERATE_PRINCIPAL
    if d < 1.0:
        return Regime.IMPATIENT_PRINCIPAL
    f0 = float(F_prime(0.0, params))
    if params.m <= -float(F_star(d * f0, params)):
        return Regime.IMPATIENT_AGENT_SMALL_M
    return Regime.IMPATIENT_AGENT_LARGE_M
