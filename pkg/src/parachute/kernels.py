"""Hot loops with a numba implementation and a numpy twin.

Both variants perform the same floating point operations in the same order;
``dispatch`` picks one according to ``accel.backend()``.
"""
import math

import numpy as np

from .accel import backend, njit


# -- intensity control sweep of the second-best HJB ------------------------------

@njit
def _sweep_b_loop(y, v, P, b_grid, dy, m, r, rho, delta):
    n = y.size
    best = np.empty(n)
    b_out = np.empty(n)
    U_out = np.empty(n)
    for i in range(n):
        bv = -m
        bb = m
        bu = 0.0
        for k in range(b_grid.size - 1):
            b = b_grid[k]
            U = -m / (b * b)
            dest = y[i] + r * U
            if dest < 0.0:
                continue
            x = dest / dy
            j = int(math.floor(x))
            if j > n - 2:
                j = n - 2
            w = x - j
            vd = v[j] * (1.0 - w) + v[j + 1] * w
            val = -b + delta * P[i] * (1.0 / b - 1.0 / m) - delta * (b / m) * U * P[i] \
                + (b / (m * rho)) * (vd - v[i])
            if val > bv:
                bv = val
                bb = b
                bu = U
        best[i] = bv
        b_out[i] = bb
        U_out[i] = bu
    return best, b_out, U_out


def _sweep_b_numpy(y, v, P, b_grid, dy, m, r, rho, delta):
    n = y.size
    best = np.full(n, -m)
    b_out = np.full(n, m)
    U_out = np.zeros(n)
    for k in range(b_grid.size - 1):
        b = b_grid[k]
        U = -m / (b * b)
        dest = y + r * U
        ok = dest >= 0.0
        x = np.where(ok, dest, 0.0) / dy
        j = np.minimum(np.floor(x).astype(np.int64), n - 2)
        w = x - j
        vd = v[j] * (1.0 - w) + v[j + 1] * w
        val = -b + delta * P * (1.0 / b - 1.0 / m) - delta * (b / m) * U * P \
            + (b / (m * rho)) * (vd - v)
        better = ok & (val > best)
        best = np.where(better, val, best)
        b_out = np.where(better, b, b_out)
        U_out = np.where(better, U, U_out)
    return best, b_out, U_out


def sweep_b(y, v, P, b_grid, dy, m, r, rho, delta):
    """Best jump-control value per node; b = m carries no jump exposure."""
    fn = _sweep_b_loop if backend() == "numba" else _sweep_b_numpy
    return fn(y, v, P, b_grid, float(dy), float(m), float(r), float(rho), float(delta))


# -- Monte Carlo time chunk ---------------------------------------------------------

@njit
def _lerp(arr, j, w):
    return arr[j] * (1.0 - w) + arr[j + 1] * w


@njit
def _chunk_loop(state, istate, ids, Z, Uu, step0, pol, dy, consts, rec, rec_jt, buckets):
    # consts: r, sigma, m, kappa, dt, n_steps, stop_tol, jumps, stride, n_rec_paths
    r, sigma, m, kappa, dt = consts[0], consts[1], consts[2], consts[3], consts[4]
    n_steps = int(consts[5])
    stop_tol = consts[6]
    jumps = consts[7] > 0.5
    stride = int(consts[8])
    n_rec = int(consts[9])
    n_grid = pol.shape[1]
    sq = math.sqrt(dt)
    K = Z.shape[1]
    for row in range(ids.size):
        p = ids[row]
        if istate[p, 0] != 0:
            continue
        Y = state[p, 0]
        X = state[p, 1]
        for k in range(K):
            step = step0 + k
            if step >= n_steps:
                break
            x = Y / dy
            j = int(math.floor(x))
            if j > n_grid - 2:
                istate[p, 0] = 3
                break
            w = x - j
            a = _lerp(pol[0], j, w)
            b = _lerp(pol[1], j, w)
            z = _lerp(pol[2], j, w)
            U = _lerp(pol[3], j, w)
            eta = _lerp(pol[4], j, w)
            if U < -Y / r:
                U = -Y / r
            lam = b / m
            h = 0.5 * a * a + kappa * a + 1.0 / b - 1.0 / m
            t = step * dt
            state[p, 4] += r * math.exp(-r * t) * (eta - h) * dt
            state[p, 5] += lam * dt
            dW = sq * Z[row, k]
            Yn = Y + r * (Y - eta + h - lam * U) * dt + r * sigma * z * dW
            Xn = X + a * dt + sigma * dW
            if jumps and Uu[row, k] < lam * dt:
                dest = Y + r * U
                if dest < state[p, 6]:
                    state[p, 6] = dest
                Yn += r * U
                Xn -= m
                nj = istate[p, 1]
                if p < n_rec and nj < rec_jt.shape[1]:
                    rec_jt[p, nj] = t + dt
                istate[p, 1] = nj + 1
            Y = Yn
            X = Xn
            if Y < state[p, 7]:
                state[p, 7] = Y
            clamped = False
            if Y < 0.0:
                Y = 0.0
                clamped = True
                istate[p, 2] += 1
            done = step + 1
            xg = Y / dy
            jg = int(math.floor(xg))
            if jg > n_grid - 2:
                jg = n_grid - 2
            gap = _lerp(pol[5], jg, xg - jg)
            stopped = clamped or gap <= stop_tol
            if done % stride == 0:
                bk = done // stride
                if p < n_rec:
                    rec[p, bk, 0] = X
                    rec[p, bk, 1] = Y
                    rec[p, bk, 2] = a
                    rec[p, bk, 3] = b
                if not stopped:
                    buckets[bk, 0] += X
                    buckets[bk, 1] += 1.0
            if stopped:
                istate[p, 0] = 1
                state[p, 3] = done * dt
                break
            if done >= n_steps:
                istate[p, 0] = 2
                state[p, 3] = done * dt
                break
        state[p, 0] = Y
        state[p, 1] = X


def _chunk_numpy(state, istate, ids, Z, Uu, step0, pol, dy, consts, rec, rec_jt, buckets):
    r, sigma, m, kappa, dt = consts[0], consts[1], consts[2], consts[3], consts[4]
    n_steps = int(consts[5])
    stop_tol = consts[6]
    jumps = consts[7] > 0.5
    stride = int(consts[8])
    n_rec = int(consts[9])
    n_grid = pol.shape[1]
    sq = math.sqrt(dt)
    rows = np.nonzero(istate[ids, 0] == 0)[0]
    for k in range(Z.shape[1]):
        step = step0 + k
        if step >= n_steps or rows.size == 0:
            break
        p = ids[rows]
        Y = state[p, 0]
        X = state[p, 1]
        x = Y / dy
        j = np.floor(x).astype(np.int64)
        out = j > n_grid - 2
        if np.any(out):
            istate[p[out], 0] = 3
            keep = ~out
            rows, p, Y, X, x, j = rows[keep], p[keep], Y[keep], X[keep], x[keep], j[keep]
        w = x - j
        a = pol[0, j] * (1.0 - w) + pol[0, j + 1] * w
        b = pol[1, j] * (1.0 - w) + pol[1, j + 1] * w
        z = pol[2, j] * (1.0 - w) + pol[2, j + 1] * w
        U = pol[3, j] * (1.0 - w) + pol[3, j + 1] * w
        eta = pol[4, j] * (1.0 - w) + pol[4, j + 1] * w
        U = np.maximum(U, -Y / r)
        lam = b / m
        h = 0.5 * a * a + kappa * a + 1.0 / b - 1.0 / m
        t = step * dt
        state[p, 4] += r * math.exp(-r * t) * (eta - h) * dt
        state[p, 5] += lam * dt
        dW = sq * Z[rows, k]
        Yn = Y + r * (Y - eta + h - lam * U) * dt + r * sigma * z * dW
        Xn = X + a * dt + sigma * dW
        if jumps:
            jump = Uu[rows, k] < lam * dt
            if np.any(jump):
                pj = p[jump]
                dest = Y[jump] + r * U[jump]
                state[pj, 6] = np.minimum(state[pj, 6], dest)
                Yn[jump] += r * U[jump]
                Xn[jump] -= m
                nj = istate[pj, 1]
                keep = (pj < n_rec) & (nj < rec_jt.shape[1])
                rec_jt[pj[keep], nj[keep]] = t + dt
                istate[pj, 1] = nj + 1
        Y, X = Yn, Xn
        state[p, 7] = np.minimum(state[p, 7], Y)
        clamped = Y < 0.0
        Y = np.where(clamped, 0.0, Y)
        istate[p[clamped], 2] += 1
        done = step + 1
        xg = Y / dy
        jg = np.minimum(np.floor(xg).astype(np.int64), n_grid - 2)
        wg = xg - jg
        gap = pol[5, jg] * (1.0 - wg) + pol[5, jg + 1] * wg
        stopped = clamped | (gap <= stop_tol)
        state[p, 0] = Y
        state[p, 1] = X
        if done % stride == 0:
            bk = done // stride
            recd = p < n_rec
            rec[p[recd], bk, 0] = X[recd]
            rec[p[recd], bk, 1] = Y[recd]
            rec[p[recd], bk, 2] = a[recd]
            rec[p[recd], bk, 3] = b[recd]
            buckets[bk, 0] += X[~stopped].sum()
            buckets[bk, 1] += float(np.count_nonzero(~stopped))
        if np.any(stopped):
            istate[p[stopped], 0] = 1
            state[p[stopped], 3] = done * dt
        if done >= n_steps:
            left = ~stopped
            istate[p[left], 0] = 2
            state[p[left], 3] = done * dt
        rows = rows[~stopped] if done < n_steps else rows[:0]


def simulate_chunk(*args):
    """Advance the live paths ``ids`` through one block of pre-drawn shocks.

    ``state`` columns: Y, X, -, tau, promise integral, intensity integral,
    min jump destination, min pre-clamp Y. ``istate`` columns: status
    (0 live, 1 stopped, 2 horizon, 3 left grid), jump count, clamp count.
    """
    fn = _chunk_loop if backend() == "numba" else _chunk_numpy
    return fn(*args)
