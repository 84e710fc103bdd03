"""Monte Carlo simulation of optimal second-best contracts up to termination."""
from dataclasses import dataclass, asdict, field

import numpy as np

from .accel import backend
from .errors import ConfigError, InvariantError
from .kernels import simulate_chunk

CHUNK_CELLS = 4_000_000   # shocks per draw block (per array)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    horizon: float = 20.0
    n_paths: int = 10_000
    seed: int = 20240611
    y0: float = 0.11
    x0: float = 0.0
    stop_tol: float = 1e-7
    record_paths: int = 20
    record_every: int = 100
    max_recorded_jumps: int = 256
    jumps: bool = True

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.dt >= 0.01:
            # b/m <= 1, so this keeps the per-step jump probability below 1%
            raise ConfigError("dt must be below 0.01 for one-jump-per-step thinning")
        if not self.horizon >= self.dt:
            raise ConfigError("horizon must be at least dt")
        if not isinstance(self.n_paths, int) or self.n_paths < 1:
            raise ConfigError("n_paths must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.y0 < 0:
            raise ConfigError("y0 must be non-negative")
        if self.stop_tol < 0:
            raise ConfigError("stop_tol must be non-negative")
        if self.record_paths < 0 or self.record_every < 1 or self.max_recorded_jumps < 0:
            raise ConfigError("invalid recording settings")

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return SimConfig(**d)

    def to_dict(self):
        return asdict(self)


@dataclass
class TrajectoryBatch:
    """Per-path outcomes plus strided records of the first few paths.

    ``status`` is 1 for stopped, 2 for reaching the horizon and 3 for leaving
    the solver grid (aborted). ``records`` has shape (paths, times, 4) holding
    X, Y, a*, b* and is NaN after termination.
    """
    tau: np.ndarray
    status: np.ndarray
    X_tau: np.ndarray
    Y_tau: np.ndarray
    xi: np.ndarray
    n_jumps: np.ndarray
    intensity: np.ndarray
    promise: np.ndarray
    min_Y: np.ndarray
    min_jump_dest: np.ndarray
    n_clamped: np.ndarray
    t_record: np.ndarray
    records: np.ndarray
    jump_times: np.ndarray
    alive_sum_X: np.ndarray
    alive_count: np.ndarray
    config: SimConfig
    gamma: float
    r: float
    backend: str = field(default="numpy")

    @property
    def stopped(self):
        return self.status == 1

    @property
    def n_aborted(self):
        return int(np.count_nonzero(self.status == 3))


def _policy_table(value, policy, params):
    pol = np.vstack([policy.a, policy.b, policy.z, policy.U, policy.eta,
                     value.v - value.barrier]).astype(float)
    if policy.mode == "accident-free":
        pol[1] = params.m
        pol[3] = 0.0
    return np.ascontiguousarray(pol)


def _streams(seed, i):
    ss = np.random.SeedSequence(seed, spawn_key=(i,))
    normals, uniforms = ss.spawn(2)
    return np.random.Generator(np.random.PCG64(normals)), np.random.Generator(np.random.PCG64(uniforms))


def simulate(value, policy, params, config=SimConfig()):
    """Simulate ``config.n_paths`` contracts driven by the solved policy.

    Each path owns two random streams derived from (seed, path index), one for
    Brownian increments and one for accident thinning, so results do not
    depend on block sizes or on the backend's traversal order.
    """
    if abs(params.delta - 1.0) > 1e-12:
        raise ConfigError("simulation is implemented for delta = 1")
    grid = value.grid
    if config.y0 > grid[-1]:
        raise ConfigError("y0 lies beyond the solver grid")
    dy = float(grid[1] - grid[0])
    pol = _policy_table(value, policy, params)
    n, n_steps = config.n_paths, config.n_steps
    stride = config.record_every
    n_buckets = n_steps // stride + 1
    n_rec = min(config.record_paths, n)

    state = np.zeros((n, 8))
    state[:, 0] = config.y0
    state[:, 1] = config.x0
    state[:, 6] = np.inf
    state[:, 7] = config.y0
    istate = np.zeros((n, 3), dtype=np.int64)
    rec = np.full((n_rec, n_buckets, 4), np.nan)
    rec_jt = np.full((n_rec, config.max_recorded_jumps), np.nan)
    buckets = np.zeros((n_buckets, 2))

    gap0 = float(np.interp(config.y0, grid, pol[5]))
    a0 = float(np.interp(config.y0, grid, pol[0]))
    b0 = float(np.interp(config.y0, grid, pol[1]))
    rec[:, 0, :] = (config.x0, config.y0, a0, b0)
    if gap0 <= config.stop_tol:
        istate[:, 0] = 1
    else:
        buckets[0] = (config.x0 * n, n)

    consts = np.array([params.r, params.sigma, params.m, params.kappa, config.dt,
                       n_steps, config.stop_tol, 1.0 if config.jumps else 0.0,
                       stride, n_rec], dtype=float)
    gens = [None] * n
    block = max(1, min(n, 2048))
    K = max(1, min(n_steps, CHUNK_CELLS // block))
    for start in range(0, n, block):
        ids = np.arange(start, min(start + block, n), dtype=np.int64)
        for i in ids:
            gens[i] = _streams(config.seed, int(i))
        step0 = 0
        while step0 < n_steps:
            live = ids[istate[ids, 0] == 0]
            if live.size == 0:
                break
            k = min(K, n_steps - step0)
            Z = np.zeros((ids.size, k))
            Uu = np.ones((ids.size, k))
            for row, i in enumerate(ids):
                if istate[i, 0] == 0:
                    g_n, g_u = gens[i]
                    Z[row] = g_n.standard_normal(k)
                    Uu[row] = g_u.random(k)
            simulate_chunk(state, istate, ids, Z, Uu, step0, pol, dy, consts, rec, rec_jt,
                           buckets)
            step0 += k
        for i in ids:
            gens[i] = None

    status = istate[:, 0].copy()
    if np.any(status == 0):
        raise InvariantError("paths left unfinished")
    tau = np.where(status == 1, state[:, 3], np.where(status == 2, config.horizon, state[:, 3]))
    Y_tau = state[:, 0]
    xi = np.where(status == 1, Y_tau ** params.gamma, np.nan)
    batch = TrajectoryBatch(
        tau=tau, status=status, X_tau=state[:, 1], Y_tau=Y_tau, xi=xi,
        n_jumps=istate[:, 1].copy(), intensity=state[:, 5].copy(), promise=state[:, 4].copy(),
        min_Y=state[:, 7].copy(), min_jump_dest=state[:, 6].copy(), n_clamped=istate[:, 2].copy(),
        t_record=np.arange(n_buckets) * stride * config.dt, records=rec, jump_times=rec_jt,
        alive_sum_X=buckets[:, 0].copy(), alive_count=buckets[:, 1].copy(), config=config,
        gamma=params.gamma, r=params.r, backend=backend())
    if np.any(batch.min_jump_dest < -1e-9):
        raise InvariantError("a jump pushed continuation utility below zero")
    return batch


def promise_keeping(batch, params=None):
    """Mean and standard error of e^{-r tau} Y_tau + int_0^tau r e^{-rs} (eta - h) ds."""
    r = batch.r if params is None else params.r
    f = np.exp(-r * batch.tau) * batch.Y_tau + batch.promise
    return float(f.mean()), float(f.std(ddof=1) / np.sqrt(f.size)) if f.size > 1 else float("nan")


def aggregates(batch, bins=20):
    """Time-bucketed mean project value, termination histogram and counts."""
    cfg = batch.config
    n = batch.tau.size
    t = batch.t_record
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_alive = batch.alive_sum_X / batch.alive_count
    # paths that terminated by time t contribute their frozen X_tau
    ended = batch.status != 2
    order = np.argsort(batch.tau[ended], kind="stable")
    tau_sorted = batch.tau[ended][order]
    cum_X = np.concatenate([[0.0], np.cumsum(batch.X_tau[ended][order])])
    k = np.searchsorted(tau_sorted, t + 0.5 * cfg.dt, side="right")
    mean_frozen = (batch.alive_sum_X + cum_X[k]) / n
    edges = np.linspace(0.0, cfg.horizon, bins + 1)
    hist, _ = np.histogram(batch.tau[batch.status == 1], bins=edges)
    return {
        "t": t,
        "mean_X_alive": mean_alive,
        "mean_X": mean_frozen,
        "tau_edges": edges,
        "tau_hist": hist,
        "unstopped": int(np.count_nonzero(batch.status == 2)),
        "unstopped_fraction": float(np.mean(batch.status == 2)),
        "mean_X_tau": float(batch.X_tau.mean()),
        "mean_tau": float(batch.tau.mean()),
        "mean_xi": float(np.nanmean(batch.xi)) if np.any(batch.status == 1) else float("nan"),
        "mean_jumps": float(batch.n_jumps.mean()),
        "mean_intensity": float(batch.intensity.mean()),
        "aborted": batch.n_aborted,
    }


def summary(batch, params=None):
    est, se = promise_keeping(batch, params)
    agg = aggregates(batch)
    return {
        "unstopped_fraction": agg["unstopped_fraction"],
        "mean_X_tau": agg["mean_X_tau"],
        "mean_tau": agg["mean_tau"],
        "promise_keeping": {"estimate": est, "se": se},
        "mean_xi": agg["mean_xi"],
        "mean_jumps": agg["mean_jumps"],
        "mean_intensity": agg["mean_intensity"],
        "aborted": agg["aborted"],
        "min_Y_before_clamp": float(batch.min_Y.min()),
        "clamped_paths": int(np.count_nonzero(batch.n_clamped)),
        "backend": batch.backend,
    }
