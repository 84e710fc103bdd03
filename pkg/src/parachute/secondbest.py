"""Second-best value function: policy iteration on the obstacle HJB with
point-mass accidents, plus an accident-free comparison mode."""
import logging
from dataclasses import dataclass, asdict

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, ConvergenceError, InvariantError
from .facelift import Facelift
from .kernels import sweep_b
from .model import F, F_star, F_star_prime, Regime, classify_regime

log = logging.getLogger(__name__)

MODES = ("with-accidents", "accident-free")
SCHEMES = ("hybrid", "upwind")
CONTACT_TOL = 1e-7
COARSEST = 125


@dataclass(frozen=True)
class SolverConfig:
    n_nodes: int = 2000
    y_max: float = 1.5
    tol: float = 1e-9
    max_iters: int = 500
    a_grid: int = 200
    b_grid: int = 200
    mode: str = "with-accidents"
    auto_extend: bool = True
    scheme: str = "hybrid"

    def __post_init__(self):
        if not isinstance(self.n_nodes, int) or self.n_nodes < 100:
            raise ConfigError("n_nodes must be an integer >= 100")
        if not self.y_max > 0:
            raise ConfigError("y_max must be positive")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not isinstance(self.max_iters, int) or self.max_iters < 1:
            raise ConfigError("max_iters must be a positive integer")
        if not isinstance(self.a_grid, int) or self.a_grid < 2:
            raise ConfigError("a_grid must be an integer >= 2")
        if not isinstance(self.b_grid, int) or self.b_grid < 2:
            raise ConfigError("b_grid must be an integer >= 2")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return SolverConfig(**d)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ValueFunction:
    grid: np.ndarray
    v: np.ndarray
    barrier: np.ndarray
    contact: np.ndarray
    dv: np.ndarray
    d2v: np.ndarray

    @property
    def dy(self):
        return self.grid[1] - self.grid[0]

    def __call__(self, y):
        return np.interp(y, self.grid, self.v)


@dataclass(frozen=True)
class PolicyField:
    a: np.ndarray
    b: np.ndarray
    z: np.ndarray
    U: np.ndarray
    eta: np.ndarray
    stop: np.ndarray
    mode: str = "with-accidents"


@dataclass(frozen=True)
class Solution:
    value: ValueFunction
    policy: PolicyField
    params: object
    config: SolverConfig
    iters: int
    residual: float

    def summary(self):
        y_arg, v_max = max_value(self.value)
        return {
            "v_max": v_max,
            "y_argmax": y_arg,
            "y_stop": stopping_region(self.value),
            "iters": self.iters,
            "residual": self.residual,
        }


def barrier_values(params, grid):
    """F-bar on the grid; constant a_bar - eps_m stands in when gamma * delta <= 1."""
    return np.asarray(Facelift(params).eval(grid), dtype=float)


# -- controls -------------------------------------------------------------------

def optimize_a(P, Q, params, n_a):
    """max over a of a + d h_a(a) P + c h_a'(a)^2 Q, with a = 0 paired with z = 0."""
    d, kap = params.delta, params.kappa
    c = params.r * d * params.sigma ** 2 / 2.0
    P = np.asarray(P, dtype=float)
    Q = np.minimum(np.asarray(Q, dtype=float), 0.0)
    A2 = d * P / 2.0 + c * Q
    A1 = 1.0 + kap * d * P + 2.0 * kap * c * Q
    A0 = kap * kap * c * Q
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(A2 < 0, -A1 / (2.0 * A2), params.a_bar)
    stat = np.clip(np.nan_to_num(stat, nan=params.a_bar), 0.0, params.a_bar)
    grid = np.linspace(0.0, params.a_bar, n_a)[1:]
    cands = np.concatenate([np.broadcast_to(grid, P.shape + grid.shape),
                            stat[..., None]], axis=-1)
    vals = A2[..., None] * cands ** 2 + A1[..., None] * cands + A0[..., None]
    k = np.argmax(vals, axis=-1)
    best = np.take_along_axis(vals, k[..., None], axis=-1)[..., 0]
    a = np.take_along_axis(cands, k[..., None], axis=-1)[..., 0]
    # zero effort needs no incentive at all, which beats any a > 0 with value <= 0
    zero = (best <= 0.0) | (a <= 0.0)
    a = np.where(zero, 0.0, a)
    best = np.where(zero, 0.0, best)
    z = np.where(zero, 0.0, a + kap)
    return best, a, z


def _stationary_a(P, Qc, params):
    d, kap = params.delta, params.kappa
    c = params.r * d * params.sigma ** 2 / 2.0
    A2 = d * P / 2.0 + c * Qc
    A1 = 1.0 + kap * d * P + 2.0 * kap * c * Qc
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.where(A2 < 0, -A1 / (2.0 * A2), params.a_bar)
    return np.clip(np.nan_to_num(stat, nan=params.a_bar), 0.0, params.a_bar)


def b_grid(params, n_b):
    return np.linspace(params.eps_m, params.m, n_b)


def local_operator(y, p, q, value, params, config=SolverConfig()):
    """Sup of the separable local operator at one node, for a frozen ``value``.

    Returns ``(value, a*, b*)``; in accident-free mode ``b*`` is NaN.
    """
    ja, a, _ = optimize_a(np.array([p]), np.array([q]), params, config.a_grid)
    if config.mode == "accident-free":
        return float(ja[0]), float(a[0]), float("nan")
    grid, v = value.grid, value.v
    vy = float(np.interp(y, grid, v))
    # evaluate the jump sweep at a single node on the frozen grid
    ys = np.array([float(y)])
    dy = grid[1] - grid[0]
    jb, b, _ = _sweep_single(ys, vy, p, grid, v, dy, params, config.b_grid)
    return float(ja[0] + jb), float(a[0]), float(b)


def _sweep_single(ys, vy, p, grid, v, dy, params, n_b):
    best, bb, bu = -params.m, params.m, 0.0
    for b in b_grid(params, n_b)[:-1]:
        U = -params.m / b ** 2
        dest = ys[0] + params.r * U
        if dest < 0:
            continue
        vd = float(np.interp(dest, grid, v))
        val = (-b + params.delta * p * (1 / b - 1 / params.m)
               - params.delta * (b / params.m) * U * p
               + b / (params.m * params.rho) * (vd - vy))
        if val > best:
            best, bb, bu = val, b, U
    return best, bb, bu


# -- scheme ----------------------------------------------------------------------

class _Scheme:
    """Linear operator of the discretised HJB for a frozen policy."""

    def __init__(self, params, config, grid, barrier):
        self.par = params
        self.cfg = config
        self.y = grid
        self.dy = grid[1] - grid[0]
        self.Fb = barrier
        self.n = grid.size
        self.c = params.r * params.delta * params.sigma ** 2 / 2.0
        self.bg = b_grid(params, config.b_grid)
        self.free = config.mode == "accident-free"
        self.hybrid = config.scheme == "hybrid"
        self.central_mask = np.zeros(self.n, dtype=bool)
        if self.free or config.b_grid < 2 or params.m == params.eps_m:
            self.jump_drift_max = 0.0
        else:
            bs = self.bg[:-1]
            self.jump_drift_max = params.delta * max(0.0, float(np.max(2.0 / bs - 1.0 / params.m)))

    def derivatives(self, v):
        dy = self.dy
        fwd = np.empty_like(v)
        fwd[:-1] = (v[1:] - v[:-1]) / dy
        fwd[-1] = fwd[-2]
        bwd = np.empty_like(v)
        bwd[1:] = fwd[:-1]
        bwd[0] = fwd[0]
        cen = 0.5 * (fwd + bwd)
        Q = np.zeros_like(v)
        Q[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dy ** 2
        return fwd, bwd, cen, Q

    def _sweep(self, v, P):
        par = self.par
        if self.free:
            z = np.zeros_like(v)
            return z, np.full_like(v, np.nan), z.copy()
        return sweep_b(self.y, v, P, self.bg, self.dy, par.m, par.r, par.rho, par.delta)

    def controls(self, v):
        """Exact policy improvement for the current iterate.

        The drift is centred for an effort level whose diffusion dominates it
        under every admissible intensity and payment, and upwinded otherwise:
        the non-negative part (state, effort cost, jump compensator) forward,
        the payment part backward. For a fixed choice the intensity and payment
        problems separate, so each is solved once per choice. Sets
        ``central_mask``.
        """
        par, dy = self.par, self.dy
        d, kap, c = par.delta, par.kappa, self.c
        fwd, bwd, cen, Q = self.derivatives(v)
        Qc = np.minimum(Q, 0.0)
        jb_f, b_f, U_f = self._sweep(v, fwd)
        if self.hybrid:
            jb_c, b_c, U_c = self._sweep(v, cen)
        grid = np.linspace(0.0, par.a_bar, self.cfg.a_grid)[1:]
        stat = [_stationary_a(P, Qc, par) for P in ((fwd, cen) if self.hybrid else (fwd,))]
        cands = np.concatenate([np.broadcast_to(grid, v.shape + grid.shape)]
                               + [s_[:, None] for s_ in stat], axis=1)
        cands = np.maximum(cands, 1e-300)
        ha = 0.5 * cands ** 2 + kap * cands
        z2 = (cands + kap) ** 2
        Y = self.y[:, None]
        eta_f = np.asarray(F_star_prime(d * bwd, par), dtype=float)
        je_f = -np.asarray(F_star(d * bwd, par), dtype=float)
        val_f = cands + d * ha * fwd[:, None] + c * z2 * Qc[:, None] + d * Y * fwd[:, None] \
            + (jb_f + je_f)[:, None]
        if self.hybrid:
            eta_c = np.asarray(F_star_prime(d * cen, par), dtype=float)
            je_c = -np.asarray(F_star(d * cen, par), dtype=float)
            val_c = cands + d * ha * cen[:, None] + c * z2 * Qc[:, None] + d * Y * cen[:, None] \
                + (jb_c + je_c)[:, None]
            # |net drift| <= max(non-negative part, payment part)
            bound = np.maximum(d * (Y + ha) + self.jump_drift_max, d * eta_c[:, None])
            ok = c * z2 >= bound * dy / 2.0
            vals = np.where(ok, val_c, val_f)
        else:
            ok = np.zeros(cands.shape, dtype=bool)
            vals = val_f
        k = np.argmax(vals, axis=1)
        rows = np.arange(v.size)
        best = vals[rows, k]
        a = cands[rows, k]
        central = ok[rows, k]
        # zero effort: no diffusion, upwind, and no incentive needed
        zero_val = d * self.y * fwd + jb_f + je_f
        zero = zero_val >= best
        a = np.where(zero, 0.0, a)
        z = np.where(zero, 0.0, a + kap)
        central = central & ~zero
        if self.hybrid:
            b = np.where(central, b_c, b_f)
            U = np.where(central, U_c, U_f)
            eta = np.where(central, eta_c, eta_f)
        else:
            b, U, eta = b_f, U_f, eta_f
        self.central_mask = central
        return a, b, z, U, eta

    def _drift(self, a, b, U):
        par = self.par
        ha = 0.5 * a * a + par.kappa * a
        if self.free:
            return par.delta * (self.y + ha)
        return par.delta * (self.y + ha + 1.0 / b - 1.0 / par.m - (b / par.m) * U)

    def assemble(self, a, b, z, U, eta):
        """Matrix and right-hand side of the continuation equation A v = rhs.

        The drift splits into a non-negative part (state, effort cost and jump
        compensator) and the non-positive payment part. Where diffusion
        dominates the total drift both are centred; elsewhere each part is
        upwinded in its own direction. Either way the matrix is an M-matrix.
        """
        par, dy, n = self.par, self.dy, self.n
        d = par.delta
        mu = self._drift(a, b, U)
        if self.free:
            lam = np.zeros(n)
            flow = a + np.asarray(F(eta, par))
        else:
            lam = b / (par.m * par.rho)
            flow = a - b + np.asarray(F(eta, par))
        diff = self.c * z * z / dy ** 2
        central = self.central_mask
        net = (mu - d * eta) / (2.0 * dy)
        if np.any(central & (diff < np.abs(net) * (1 - 1e-12))):
            raise InvariantError("centred drift without dominating diffusion")
        up = np.where(central, net, mu / dy)
        down = np.where(central, -net, d * eta / dy)
        ii = np.arange(1, n - 1)
        rows = [ii, ii, ii]
        cols = [ii, ii + 1, ii - 1]
        vals = [1.0 + up[ii] + down[ii] + 2.0 * diff[ii] + lam[ii],
                -(up[ii] + diff[ii]),
                -(down[ii] + diff[ii])]
        if not self.free:
            dest = self.y[ii] + par.r * U[ii]
            x = dest / dy
            j = np.minimum(np.floor(x).astype(np.int64), n - 2)
            w = x - j
            rows += [ii, ii]
            cols += [j, j + 1]
            vals += [-lam[ii] * (1.0 - w), -lam[ii] * w]
        A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n))
        return A, flow.copy()

    def check_monotone(self, A):
        off = A - sp.diags(A.diagonal())
        if off.nnz and off.data.max() > 1e-12:
            raise InvariantError("discrete scheme lost monotonicity (positive off-diagonal)")


def _solve_on_grid(params, config, coarse=True):
    n = config.n_nodes
    grid = np.linspace(0.0, config.y_max, n + 1)
    Fb = barrier_values(params, grid)
    sch = _Scheme(params, config, grid, Fb)
    v = Fb.copy()
    if coarse and n >= 2 * COARSEST:
        # nested solve on half the nodes gives a close starting policy
        cv = _solve_on_grid(params, config.replace(n_nodes=n // 2, tol=1e-6), coarse=True)[0]
        v = np.maximum(PchipInterpolator(cv.grid, cv.v)(grid), Fb)
        v[0], v[-1] = Fb[0], Fb[-1]
    boundary = np.zeros(n + 1, dtype=bool)
    boundary[[0, -1]] = True
    it = 0
    prev_stop = None
    for it in range(1, config.max_iters + 1):
        ctrl = sch.controls(v)
        A, rhs = sch.assemble(*ctrl)
        cont_res = A @ v - rhs
        stop = ((v - Fb) <= cont_res) | boundary
        # stop nodes are known exactly; solve for the continuation nodes only
        cont = ~stop
        Ac = A[cont]
        v_new = Fb.copy()
        if np.any(cont):
            rhs_c = rhs[cont] - Ac[:, stop] @ Fb[stop]
            v_new[cont] = spla.spsolve(Ac[:, cont].tocsc(), rhs_c)
        if not np.all(np.isfinite(v_new)):
            raise ConvergenceError("linear solve produced non-finite values")
        err = np.max(np.abs(v_new - v))
        v = v_new
        if err <= config.tol and prev_stop is not None and np.array_equal(stop, prev_stop):
            break
        prev_stop = stop
    else:
        raise ConvergenceError(f"policy iteration did not converge in {config.max_iters} steps "
                               f"(last change {err:.3e})")
    a, b, z, U, eta = sch.controls(v)
    A, rhs = sch.assemble(a, b, z, U, eta)
    sch.check_monotone(A)
    cont_res = A @ v - rhs
    gap = v - Fb
    hjb = np.minimum(gap, cont_res)
    residual = float(np.max(np.abs(hjb[1:-1])))
    stop = (gap <= cont_res) | boundary
    dy = grid[1] - grid[0]
    dv = np.gradient(v, dy)
    d2v = np.zeros_like(v)
    d2v[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / dy ** 2
    value = ValueFunction(grid=grid, v=v, barrier=Fb, contact=gap <= CONTACT_TOL,
                          dv=dv, d2v=d2v)
    policy = PolicyField(a=a, b=b, z=z, U=U, eta=eta, stop=stop, mode=config.mode)
    return value, policy, it, residual


def solve(params, config=SolverConfig()):
    """Solve the second-best HJB; returns a :class:`Solution`."""
    reg = classify_regime(params)
    if reg is Regime.DEGENERATE_PRINCIPAL:
        grid = np.linspace(0.0, config.y_max, config.n_nodes + 1)
        const = np.full(grid.size, params.a_bar - params.eps_m)
        nan = np.full(grid.size, np.nan)
        value = ValueFunction(grid, const, barrier_values(params, grid),
                              np.zeros(grid.size, bool), np.zeros(grid.size), np.zeros(grid.size))
        policy = PolicyField(nan, nan, nan, nan, nan, np.zeros(grid.size, bool), config.mode)
        return Solution(value, policy, params, config, 0, 0.0)
    if not config.mode == "accident-free" and params.m < params.eps_m:
        raise ConfigError("need eps_m <= m")
    value, policy, it, res = _solve_on_grid(params, config)
    if config.auto_extend and not _has_interior_contact(value):
        log.warning("no contact below y_max=%g; retrying on a grid twice as long", config.y_max)
        config = config.replace(y_max=2 * config.y_max, auto_extend=False)
        value, policy, it, res = _solve_on_grid(params, config)
    return Solution(value, policy, params, config, it, res)


def _has_interior_contact(value):
    c = value.contact
    return bool(np.any(c[1:-1]) and c[-2])


def max_value(value):
    """Nodal maximum of v refined by a three-point parabola."""
    y, v = value.grid, value.v
    i = int(np.argmax(v))
    if 0 < i < v.size - 1:
        f0, f1, f2 = v[i - 1], v[i], v[i + 1]
        den = f0 - 2 * f1 + f2
        if den < 0:
            s = 0.5 * (f0 - f2) / den
            return float(y[i] + s * value.dy), float(f1 - 0.25 * (f0 - f2) * s)
    return float(y[i]), float(v[i])


def stopping_region(value, tol=CONTACT_TOL):
    """Smallest y > 0 from which v stays on the barrier up to y_max."""
    gap = value.v - value.barrier
    off = np.nonzero(gap[1:] > tol)[0]
    if off.size == 0:
        return float(value.grid[1])
    k = off[-1] + 2
    if k >= value.grid.size:
        log.warning("no persistent contact within the grid")
        return float(value.grid[-1])
    return float(value.grid[k])
