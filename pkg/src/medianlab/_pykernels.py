"""Pure numpy implementations of the numerical kernels.

Same call signatures as the compiled ``_ckernels`` module. Every function
takes float64 arrays; ``q`` is a float with ``math.inf`` for the max norm.
Weights are always passed explicitly (ones for unweighted instances).
"""

import math

import numpy as np

# relative slack when comparing cumulative weight against half the total
_HALF_TOL = 1e-12
_GRID_CHUNK = 1 << 18


def _row_norms(diff, q):
    """L_q norms of the rows of ``diff`` (scaled by the row max to avoid overflow)."""
    a = np.abs(diff)
    if q == 1.0:
        return a.sum(axis=1)
    m = a.max(axis=1)
    if math.isinf(q):
        return m
    safe = np.where(m > 0, m, 1.0)
    scaled = a / safe[:, None]
    if q == 2.0:
        s = np.einsum("ij,ij->i", scaled, scaled)
        return m * np.sqrt(s)
    return m * np.power(np.power(scaled, q).sum(axis=1), 1.0 / q)


def lq_norm(x, q):
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return float(_row_norms(x[None, :], q)[0])


def distances(points, f, q):
    return _row_norms(points - f[None, :], q)


def social_cost(points, weights, f, q):
    # np.sum is pairwise, which keeps long reductions compensated
    return float(np.dot(weights, _row_norms(points - f[None, :], q)))


def smoothed_cost_grad(points, weights, f, q, eps):
    """Social cost with a quadratic cap below ``eps`` and its gradient in ``f``.

    Only for finite q > 1. Distances below ``eps`` use ``D**2/(2 eps) + eps/2``.
    """
    r = f[None, :] - points
    D = _row_norms(r, q)
    smooth = D < eps
    phi = D.copy()
    dphi = np.ones_like(D)
    if smooth.any():  # never true for eps = 0
        phi[smooth] = D[smooth] ** 2 / (2.0 * eps) + 0.5 * eps
        dphi[smooth] = D[smooth] / eps
    safe = np.where(D > 0, D, 1.0)
    unit = np.abs(r) / safe[:, None]
    if q == 2.0:
        g = r / safe[:, None]
    else:
        g = np.sign(r) * np.power(unit, q - 1.0)
    g[D == 0] = 0.0
    grad = (weights * dphi) @ g
    return float(np.dot(weights, phi)), grad


def weighted_median(points, weights, upper):
    n, d = points.shape
    order = np.argsort(points, axis=0, kind="stable")
    vals = np.take_along_axis(points, order, axis=0)
    w = weights[order]
    total = float(weights.sum())
    thr = 0.5 * total - _HALF_TOL * total
    if upper:
        tail = np.cumsum(w[::-1], axis=0)[::-1]
        ok = tail >= thr
        idx = n - 1 - np.argmax(ok[::-1], axis=0)
    else:
        cum = np.cumsum(w, axis=0)
        idx = np.argmax(cum >= thr, axis=0)
    return vals[idx, np.arange(d)].copy()


def grid_min(points, weights, lo, res, counts, q):
    """Exhaustive minimum of the social cost on ``lo + k*res`` for ``0 <= k < counts``."""
    counts = np.asarray(counts, dtype=np.int64)
    total = int(np.prod(counts))
    best_cost = math.inf
    best_flat = 0
    for start in range(0, total, _GRID_CHUNK):
        flat = np.arange(start, min(start + _GRID_CHUNK, total))
        idx = np.stack(np.unravel_index(flat, tuple(counts)), axis=1)
        cand = lo[None, :] + idx * res
        costs = np.zeros(len(flat))
        for p, w in zip(points, weights):
            costs += w * _row_norms(cand - p[None, :], q)
        k = int(np.argmin(costs))
        if costs[k] < best_cost:
            best_cost = float(costs[k])
            best_flat = int(flat[k])
    idx = np.array(np.unravel_index(best_flat, tuple(counts)), dtype=np.float64)
    return lo + idx * res, best_cost


def weiszfeld(points, weights, x0, eps, max_iter, tol):
    """Damped Weiszfeld iteration for the weighted Euclidean median.

    Distances are floored at ``eps`` so the update stays defined at data points.
    Returns the final iterate and the number of iterations used.
    """
    x = np.array(x0, dtype=np.float64)
    it = 0
    for it in range(1, max_iter + 1):
        D = np.sqrt(((points - x[None, :]) ** 2).sum(axis=1))
        inv = weights / np.maximum(D, eps)
        nxt = inv @ points / inv.sum()
        step = float(np.sqrt(((nxt - x) ** 2).sum()))
        x = nxt
        if step <= tol:
            break
    return x, it
