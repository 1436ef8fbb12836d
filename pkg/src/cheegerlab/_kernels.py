"""Numba-compiled inner loops of the primal-dual iteration.

All kernels parallelize over rows with disjoint writes; reductions collect
per-row partial sums (each accumulated serially within its row) and combine
them in fixed row order, so results are bit-reproducible regardless of
thread count.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def dual_step(u, u_prev, theta, px, py, sq):
    """p += sq * grad(u + theta*(u - u_prev)), then pointwise unit-ball projection."""
    n, ny, nx = u.shape
    w1 = 1.0 + theta
    for r in prange(ny):
        for k in range(n):
            urow = u[k, r]
            prow = u_prev[k, r]
            last_row = r == ny - 1
            if not last_row:
                urow1 = u[k, r + 1]
                prow1 = u_prev[k, r + 1]
            else:
                urow1 = urow
                prow1 = prow
            ub = w1 * urow[0] - theta * prow[0]
            for c in range(nx):
                if c < nx - 1:
                    ub_next = w1 * urow[c + 1] - theta * prow[c + 1]
                    gx = ub_next - ub
                else:
                    ub_next = ub
                    gx = 0.0
                if last_row:
                    gy = 0.0
                else:
                    gy = w1 * urow1[c] - theta * prow1[c] - ub
                a = px[k, r, c] + sq * gx
                b = py[k, r, c] + sq * gy
                n2 = a * a + b * b
                if n2 > 1.0:
                    inv = 1.0 / np.sqrt(n2)
                    a *= inv
                    b *= inv
                px[k, r, c] = a
                py[k, r, c] = b
                ub = ub_next


@njit(cache=True, parallel=True)
def primal_step(u, px, py, tq, w):
    """w = u + tq * div(p) with the divergence conventions of tvops."""
    n, ny, nx = u.shape
    for r in prange(ny):
        for k in range(n):
            for c in range(nx):
                if c == 0:
                    dx = px[k, r, 0]
                elif c < nx - 1:
                    dx = px[k, r, c] - px[k, r, c - 1]
                else:
                    dx = -px[k, r, c - 1]
                if r == 0:
                    dy = py[k, 0, c]
                elif r < ny - 1:
                    dy = py[k, r, c] - py[k, r - 1, c]
                else:
                    dy = -py[k, r - 1, c]
                w[k, r, c] = u[k, r, c] + tq * (dx + dy)


@njit(cache=True, parallel=True)
def sigma_mask(w, mask):
    """Clamp negatives, zero off-mask pixels, keep only the per-pixel winner."""
    n, ny, nx = w.shape
    for r in prange(ny):
        for c in range(nx):
            if not mask[r, c]:
                for k in range(n):
                    w[k, r, c] = 0.0
                continue
            besti = -1
            bestv = 0.0
            for k in range(n):
                v = w[k, r, c]
                if v > bestv:
                    bestv = v
                    besti = k
            for k in range(n):
                w[k, r, c] = bestv if k == besti else 0.0


@njit(cache=True, parallel=True)
def residual_stats(w, area, row_mass, row_viol):
    """Per-row |w| masses and skeleton violations of the raw primal candidate.

    row_mass has shape (n, ny), row_viol (ny,); combined by the caller.
    """
    n, ny, nx = w.shape
    for r in prange(ny):
        viol = 0.0
        for k in range(n):
            s = 0.0
            for c in range(nx):
                v = w[k, r, c]
                s += abs(v)
                if v < -viol:
                    viol = -v
            row_mass[k, r] = s
        for c in range(nx):
            tot = 0.0
            mx = 0.0
            for k in range(n):
                v = w[k, r, c]
                if v > 0.0:
                    tot += v
                    if v > mx:
                        mx = v
            if tot - mx > viol:
                viol = tot - mx
        row_viol[r] = viol


@njit(cache=True, parallel=True)
def _support_sums(w, lam, row_s, row_cnt):
    ny, nx = w.shape
    for r in prange(ny):
        s = 0.0
        cnt = 0
        for c in range(nx):
            v = w[r, c]
            # the support is exactly the positive entries
            if v > 0.0 and v > lam:
                s += v
                cnt += 1
        row_s[r] = s
        row_cnt[r] = cnt


@njit(cache=True, parallel=True)
def _zero_nonpositive(w):
    ny, nx = w.shape
    for r in prange(ny):
        for c in range(nx):
            if w[r, c] <= 0.0:
                w[r, c] = 0.0


@njit(cache=True, parallel=True)
def _apply_shift(w, lam):
    ny, nx = w.shape
    for r in prange(ny):
        for c in range(nx):
            v = w[r, c]
            if v > 0.0:
                v -= lam
                w[r, c] = v if v > 0.0 else 0.0


@njit(cache=True)
def _combine(row_s, row_cnt):
    s = 0.0
    cnt = 0
    for r in range(row_s.shape[0]):
        s += row_s[r]
        cnt += row_cnt[r]
    return s, cnt


def shift_project_inplace(w: np.ndarray, area: float,
                          row_s=None, row_cnt=None) -> bool:
    """Project one component onto the unit-mass simplex over its positive support.

    Michelot's finite active-set iteration.  Returns False when the support
    is empty.
    """
    ny = w.shape[0]
    if row_s is None:
        row_s = np.empty(ny)
        row_cnt = np.empty(ny, dtype=np.int64)
    _zero_nonpositive(w)
    _support_sums(w, -np.inf, row_s, row_cnt)
    s, cnt = _combine(row_s, row_cnt)
    if cnt == 0:
        return False
    lam = (area * s - 1.0) / (area * cnt)
    while True:
        _support_sums(w, lam, row_s, row_cnt)
        s, cnt = _combine(row_s, row_cnt)
        if cnt == 0:
            return False
        new_lam = (area * s - 1.0) / (area * cnt)
        if new_lam <= lam:
            lam = new_lam
            break
        lam = new_lam
    _apply_shift(w, lam)
    return True


@njit(cache=True, parallel=True)
def _tv_rows(u, row_tv):
    ny, nx = u.shape
    for r in prange(ny):
        s = 0.0
        last_row = r == ny - 1
        for c in range(nx):
            gx = u[r, c + 1] - u[r, c] if c < nx - 1 else 0.0
            gy = 0.0 if last_row else u[r + 1, c] - u[r, c]
            s += np.sqrt(gx * gx + gy * gy)
        row_tv[r] = s
    return row_tv


def tv_value(u: np.ndarray, h: float) -> float:
    """Coupled isotropic TV of one component, matching tvops.tv up to summation order."""
    row_tv = np.empty(u.shape[0])
    _tv_rows(u, row_tv)
    s = 0.0
    for r in range(u.shape[0]):
        s += row_tv[r]
    return float(h * s)
