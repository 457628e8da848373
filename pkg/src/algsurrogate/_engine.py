"""Compiled kernels for exact subset search.

Subsets are visited as a combination tree: the children of a sorted subset S
with largest element m are S + {j} for j > m, so every subset is reached once
and same-size subsets are reached in lexicographic order.  Each node keeps an
orthonormal basis of its columns (two-pass classical Gram-Schmidt) and the
residual of ``z``; a child costs O(N * rank).

For branch-and-bound, the descendants of S + {j} all lie inside
S + {j, ..., k-1}, whose SSR lower-bounds them.  These sets shrink as j grows,
so the bounds are non-decreasing in j and the first pruned child ends the
sibling loop.
"""

from __future__ import annotations

import numpy as np
from numba import njit

AICC, HQIC, MSE, CP, BIC, RIC = 0, 1, 2, 3, 4, 5
SSR_FLOOR = 1e-300
RANK_TOL = 1e-10


@njit(cache=True)
def metric_formula(kind, ssr, n, p, k, sigma_sq):
    """Fitness metric value; +inf where the formula is undefined."""
    if kind == AICC:
        den = n - p - 1
        if den <= 0:
            return np.inf
        s = max(ssr, SSR_FLOOR)
        return n * np.log(s / n) + 2.0 * p + 2.0 * p * (p + 1) / den
    if kind == HQIC:
        s = max(ssr, SSR_FLOOR)
        return n * np.log(s / n) + 2.0 * p * np.log(np.log(n))
    if kind == MSE:
        den = n - p - 1
        if den <= 0:
            return np.inf
        return ssr / den
    if kind == CP:
        return ssr / sigma_sq + 2.0 * p - n
    if kind == BIC:
        return ssr / sigma_sq + p * np.log(n)
    return ssr / sigma_sq + 2.0 * p * np.log(k)


@njit(cache=True)
def _add_column(Q, rank, x, res_in, res_out, n):
    """Orthogonalize unit-norm ``x`` against Q[:rank]; update the residual.

    Returns the new rank (unchanged when x is numerically dependent).
    """
    w = x.copy()
    for _ in range(2):
        for i in range(rank):
            c = 0.0
            for t in range(n):
                c += Q[i, t] * w[t]
            for t in range(n):
                w[t] -= c * Q[i, t]
    nw = 0.0
    for t in range(n):
        nw += w[t] * w[t]
    nw = np.sqrt(nw)
    if nw <= RANK_TOL or rank >= n:
        for t in range(n):
            res_out[t] = res_in[t]
        return rank
    for t in range(n):
        Q[rank, t] = w[t] / nw
    c = 0.0
    for t in range(n):
        c += Q[rank, t] * res_in[t]
    for t in range(n):
        res_out[t] = res_in[t] - c * Q[rank, t]
    return rank + 1


@njit(cache=True)
def _sq(v):
    s = 0.0
    for t in range(v.size):
        s += v[t] * v[t]
    return s


@njit(cache=True)
def _lex_less(a, b, m):
    for i in range(m):
        if a[i] != b[i]:
            return a[i] < b[i]
    return False


@njit(cache=True)
def _relaxed(b, slack):
    r = np.sqrt(b) - slack
    return r * r if r > 0.0 else 0.0


@njit(cache=True)
def _metric_lb(kind, ssr_lb, n, p_lo, p_hi, k, sigma_sq):
    best = np.inf
    for p in range(p_lo, p_hi + 1):
        v = metric_formula(kind, ssr_lb, n, p, k, sigma_sq)
        if v < best:
            best = v
    return best


@njit(cache=True)
def search(Xs, z, direct, r, kind, sigma_sq, k_metric, prune, metric_tol):
    """Exact subset search over the columns of ``Xs`` (unit-norm columns).

    direct=True minimizes the fitness metric over all subsets (null model
    included); direct=False minimizes SSR subject to |S| <= r.

    Returns (best_set_padded, best_p, best_ssr, best_value, nodes).
    """
    n, k = Xs.shape
    XT = np.ascontiguousarray(Xs.T)
    zz = _sq(z)
    slack = 1e-13 * np.sqrt(zz)
    max_depth = k if direct else min(r, k)

    Q = np.zeros((k + 1, n))
    res = np.zeros((k + 2, n))
    ssr_at = np.zeros(k + 2)
    rank_at = np.zeros(k + 2, dtype=np.int64)
    sel = np.full(k + 1, -1, dtype=np.int64)
    next_j = np.zeros(k + 2, dtype=np.int64)
    bnd = np.zeros((k + 2, k + 1))
    tmpQ = np.zeros((k + 1, n))
    tmp_a = np.zeros(n)
    tmp_b = np.zeros(n)

    res[0, :] = z
    ssr_at[0] = zz
    best = np.full(k + 1, -1, dtype=np.int64)
    best_p = 0
    best_ssr = zz
    if direct:
        best_val = metric_formula(kind, zz, n, 0, k_metric, sigma_sq)
    else:
        best_val = zz
    nodes = 1

    if prune:
        _fill_bounds(bnd, 0, tmpQ, Q, 0, XT, res[0], tmp_a, tmp_b, 0, k, n)

    depth = 0
    next_j[0] = 0
    while depth >= 0:
        d = depth
        j = next_j[d]
        if j >= k or d >= max_depth:
            depth -= 1
            continue
        if prune:
            b = _relaxed(bnd[d, j], slack)
            if direct:
                lb = _metric_lb(kind, b, n, d + 1, d + 1 + (k - 1 - j), k_metric, sigma_sq)
                if lb > best_val + metric_tol:
                    depth -= 1
                    continue
            else:
                if b > best_val + 1e-12 * best_val + 1e-28 * zz:
                    depth -= 1
                    continue
        next_j[d] = j + 1
        sel[d] = j
        rank_at[d + 1] = _add_column(Q, rank_at[d], XT[j], res[d], res[d + 1], n)
        s = _sq(res[d + 1])
        ssr_at[d + 1] = s
        p = d + 1
        nodes += 1

        if direct:
            v = metric_formula(kind, s, n, p, k_metric, sigma_sq)
            better = False
            if v < best_val - metric_tol:
                better = True
            elif v <= best_val + metric_tol:
                if p < best_p:
                    better = True
                elif p == best_p and _lex_less(sel, best, p):
                    better = True
            if better:
                best_val = v
                best_ssr = s
                best_p = p
                best[:] = -1
                best[:p] = sel[:p]
        else:
            tol = 1e-12 * max(s, best_val) + 1e-28 * zz
            better = False
            if s < best_val - tol:
                better = True
            elif s <= best_val + tol:
                if p < best_p:
                    better = True
                elif p == best_p and _lex_less(sel, best, p):
                    better = True
            if better:
                best_val = s
                best_ssr = s
                best_p = p
                best[:] = -1
                best[:p] = sel[:p]

        if p < max_depth and j + 1 < k:
            if prune:
                _fill_bounds(bnd, p, tmpQ, Q, rank_at[p], XT, res[p], tmp_a, tmp_b,
                             j + 1, k, n)
            next_j[p] = j + 1
            depth = p
    return best, best_p, best_ssr, best_val, nodes


@njit(cache=True)
def _fill_bounds(bnd, depth, tmpQ, Q, rank, XT, res, tmp_a, tmp_b, j0, k, n):
    """bnd[depth, j] = SSR(S + {j..k-1}) for j in [j0, k)."""
    for i in range(rank):
        tmpQ[i, :] = Q[i, :]
    rk = rank
    tmp_a[:] = res
    zero = False
    for j in range(k - 1, j0 - 1, -1):
        if zero:
            bnd[depth, j] = 0.0
            continue
        rk = _add_column(tmpQ, rk, XT[j], tmp_a, tmp_b, n)
        tmp_a[:] = tmp_b
        bnd[depth, j] = _sq(tmp_a)
        if rk >= n:
            zero = True


@njit(cache=True)
def all_subset_ssr(Xs, z):
    """SSR of every column subset, indexed by bitmask (bit j = column j)."""
    n, k = Xs.shape
    XT = np.ascontiguousarray(Xs.T)
    out = np.empty(1 << k)
    out[0] = _sq(z)
    Q = np.zeros((k + 1, n))
    res = np.zeros((k + 2, n))
    rank_at = np.zeros(k + 2, dtype=np.int64)
    mask_at = np.zeros(k + 2, dtype=np.int64)
    next_j = np.zeros(k + 2, dtype=np.int64)
    res[0, :] = z
    depth = 0
    while depth >= 0:
        d = depth
        j = next_j[d]
        if j >= k:
            depth -= 1
            continue
        next_j[d] = j + 1
        rank_at[d + 1] = _add_column(Q, rank_at[d], XT[j], res[d], res[d + 1], n)
        mask_at[d + 1] = mask_at[d] | (1 << j)
        out[mask_at[d + 1]] = _sq(res[d + 1])
        if j + 1 < k:
            next_j[d + 1] = j + 1
            depth = d + 1
    return out
