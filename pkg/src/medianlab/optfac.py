"""Optimal facility location f* = argmin_f SC(P, f), a grid oracle, and ratio evaluation.

The social cost is a convex sum of norms, so any local minimum is global;
the work is in handling the kinks at data points and the piecewise-linear
max norm:

* q = 1 and d = 1: the coordinate median is exactly optimal.
* q = inf: the problem is a linear program (one epigraph variable per point),
  solved with HiGHS.
* 1 < q < inf: L-BFGS on the cost with a quadratic cap on distances below a
  tiny floor, multi-started, with every data point and the coordinate median
  also scored exactly. Optimality is certified either by a small gradient or,
  when the winner is a data point p_k, by the subgradient test
  ``||sum_{i != k} w_i grad D_i||_dual <= w_k``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Iterator, Sequence

import numpy as np
from scipy import optimize, sparse

from medianlab._backend import kernels
from medianlab.bounds import ub
from medianlab.mechanisms import Instance, Mechanism, TieBreak, as_instance, coordinate_median, median_mechanism
from medianlab.norms import NormOrder, as_order, as_point, social_cost

log = logging.getLogger(__name__)

GRID_MAX_DIM = 4
GRID_MAX_POINTS = 50_000_000


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for :func:`optimal_facility`.

    ``smoothing_eps`` is relative: the absolute floor is
    ``smoothing_eps * diameter(P)``. ``grad_tol`` is relative to the total weight.
    """

    max_iters: int = 5000
    grad_tol: float = 1e-8
    restarts: int = 5
    smoothing_eps: float = 1e-9
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.smoothing_eps > 0:
            raise ValueError("smoothing_eps must be > 0")


@dataclass(frozen=True)
class FacilityResult:
    """Minimizer and its exact social cost; unpacks as ``(point, cost)``."""

    point: np.ndarray
    cost: float
    converged: bool = True
    method: str = ""
    detail: dict = field(default_factory=dict)

    def __iter__(self) -> Iterator[Any]:
        return iter((self.point, self.cost))


def _dedupe(P: Instance) -> tuple[np.ndarray, np.ndarray]:
    """Collapse repeated locations into one weighted point each."""
    uniq, inv = np.unique(P.points, axis=0, return_inverse=True)
    w = np.bincount(inv.reshape(-1), weights=P.weight_array, minlength=uniq.shape[0])
    return np.ascontiguousarray(uniq), np.ascontiguousarray(w)


def _dual_norm(g: np.ndarray, q: NormOrder) -> float:
    return float(kernels.lq_norm(np.ascontiguousarray(g), q.dual))


def _exact_cost(points: np.ndarray, w: np.ndarray, f: np.ndarray, q: NormOrder) -> float:
    return float(kernels.social_cost(points, w, np.ascontiguousarray(f), q.q))


def _data_point_certificate(points: np.ndarray, w: np.ndarray, k: int, q: NormOrder) -> float:
    """``||sum_{i != k} w_i grad D_i(p_k)||_dual - w_k``; <= 0 proves p_k optimal."""
    _, g = kernels.smoothed_cost_grad(points, w, points[k], q.q, 0.0)
    return _dual_norm(g, q) - w[k]


def _solve_linf(points: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, bool]:
    """min sum_i w_i t_i  s.t.  -t_i <= x_j - p_ij <= t_i, as an LP in (x, t)."""
    n, d = points.shape
    rows = n * d
    r = np.arange(rows)
    xi = np.tile(np.arange(d), n)
    ti = np.repeat(np.arange(n), d)
    # x_j - t_i <= p_ij   and   -x_j - t_i <= -p_ij
    A_pos = sparse.csr_matrix((np.r_[np.ones(rows), -np.ones(rows)], (np.r_[r, r], np.r_[xi, d + ti])), shape=(rows, d + n))
    A_neg = sparse.csr_matrix((np.r_[-np.ones(rows), -np.ones(rows)], (np.r_[r, r], np.r_[xi, d + ti])), shape=(rows, d + n))
    A = sparse.vstack([A_pos, A_neg], format="csr")
    b = np.r_[points.reshape(-1), -points.reshape(-1)]
    cost = np.r_[np.zeros(d), w]
    bnds = [(None, None)] * d + [(0, None)] * n
    res = optimize.linprog(cost, A_ub=A, b_ub=b, bounds=bnds, method="highs")
    if res.status != 0:
        log.warning("max-norm LP did not solve cleanly: %s", res.message)
        return points[0].copy(), False
    return np.asarray(res.x[:d], dtype=np.float64), True


def _lbfgs(points: np.ndarray, w: np.ndarray, x0: np.ndarray, q: NormOrder, eps: float, cfg: SolverConfig) -> np.ndarray:
    def fun(x: np.ndarray) -> tuple[float, np.ndarray]:
        return kernels.smoothed_cost_grad(points, w, np.ascontiguousarray(x), q.q, eps)

    res = optimize.minimize(
        fun,
        x0,
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": cfg.max_iters, "gtol": 0.1 * cfg.grad_tol * float(w.sum()), "ftol": 0.0, "maxcor": 20},
    )
    return np.asarray(res.x, dtype=np.float64)


def _root_polish(points: np.ndarray, w: np.ndarray, x: np.ndarray, q: NormOrder, eps: float) -> np.ndarray | None:
    """Solve grad = 0 directly from a nearby iterate.

    Close to the optimum the cost changes by less than its rounding error, so
    line searches on function values stall; the gradient itself is still
    accurate and can be driven to zero by a Powell hybrid step.
    """

    def grad(y: np.ndarray) -> np.ndarray:
        return kernels.smoothed_cost_grad(points, w, np.ascontiguousarray(y), q.q, eps)[1]

    try:
        res = optimize.root(grad, x, method="hybr", options={"xtol": 1e-15})
    except (ValueError, FloatingPointError):
        return None
    y = np.asarray(res.x, dtype=np.float64)
    return y if np.all(np.isfinite(y)) else None


def _snap_polish(points: np.ndarray, w: np.ndarray, x: np.ndarray, q: NormOrder, eps: float, cfg: SolverConfig) -> np.ndarray | None:
    """Pin coordinates that sit next to a data coordinate and re-solve the rest.

    For 1 < q < 2 the partial derivatives behave like |f_j - p_ij|^(q-1) near
    such a coordinate, so a quasi-Newton method stalls a little way from an
    optimum that lies exactly on it; pinning it there removes the stall.
    """
    gap = np.abs(points - x[None, :])
    nearest = gap.argmin(axis=0)
    cols = np.arange(points.shape[1])
    pinned = gap[nearest, cols] < 1e-5
    if not pinned.any():
        return None
    base = x.copy()
    base[pinned] = points[nearest[pinned], cols[pinned]]
    free = ~pinned
    if not free.any():
        return base

    def fun(y: np.ndarray) -> tuple[float, np.ndarray]:
        z = base.copy()
        z[free] = y
        val, g = kernels.smoothed_cost_grad(points, w, z, q.q, eps)
        return val, g[free]

    res = optimize.minimize(
        fun,
        base[free],
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": cfg.max_iters, "gtol": 0.1 * cfg.grad_tol * float(w.sum()), "ftol": 0.0},
    )
    base[free] = res.x
    return base


def optimal_facility(
    P: Any,
    q: Any,
    cfg: SolverConfig | None = None,
    candidates: Sequence[Any] = (),
) -> FacilityResult:
    """Minimize the social cost over R^d.

    Args:
        P: Instance or (n, d) array.
        q: norm order.
        cfg: solver settings; defaults to ``SolverConfig()``.
        candidates: extra points scored exactly and kept if better, e.g. a
            mechanism's output so the reported optimum never loses to it.

    Returns:
        FacilityResult; ``converged`` is False when no optimality certificate
        was obtained within ``cfg.max_iters`` (the best iterate is still returned).
    """
    P = as_instance(P)
    q = as_order(q)
    cfg = cfg or SolverConfig()
    points, w = _dedupe(P)
    m, d = points.shape
    if m == 1:
        return FacilityResult(points[0].copy(), 0.0, True, "single-location")
    if d == 1 or q.is_one:
        med = kernels.weighted_median(points, w, False)
        return FacilityResult(med, _exact_cost(points, w, med, q), True, "median")

    # normalize to a unit-size box around the mean for conditioning
    center = points.mean(axis=0)
    scale = float(np.abs(points - center).max())
    Ps = np.ascontiguousarray((points - center) / scale)

    extra = [(as_point(c) - center) / scale for c in candidates]
    med = kernels.weighted_median(Ps, w, False)
    pool = [Ps[k] for k in range(m)] + [med, np.average(Ps, axis=0, weights=w)] + extra

    if q.is_inf:
        x_lp, ok = _solve_linf(Ps, w)
        pool.append(x_lp)
        costs = [_exact_cost(Ps, w, x, q) for x in pool]
        best = int(np.argmin(costs))
        return FacilityResult(center + scale * pool[best], scale * costs[best], ok, "lp")

    eps = cfg.smoothing_eps * 2.0  # diameter of the normalized cloud is at most 2
    costs_pool = [_exact_cost(Ps, w, x, q) for x in pool]
    k0 = int(np.argmin(costs_pool))
    if k0 < m:
        slack = _data_point_certificate(Ps, w, k0, q)
        if slack <= 1e-9 * float(w.sum()):
            return FacilityResult(points[k0].copy(), scale * costs_pool[k0], True, "data-point", {"data_point_slack": slack})
    rng = np.random.default_rng(cfg.seed)
    starts = [pool[int(np.argmin(costs_pool))], np.average(Ps, axis=0, weights=w)]
    while len(starts) < cfg.restarts:
        starts.append(rng.dirichlet(np.ones(m)) @ Ps)
    starts = starts[: cfg.restarts]
    for x0 in starts:
        x0 = np.ascontiguousarray(x0, dtype=np.float64)
        if q.q == 2.0:
            x0, _ = kernels.weiszfeld(Ps, w, x0, eps, cfg.max_iters, 1e-13)
        x1 = _lbfgs(Ps, w, x0, q, eps, cfg)
        pool.append(x1)
        for polished in (_root_polish(Ps, w, x1, q, eps), _snap_polish(Ps, w, x1, q, eps, cfg)):
            if polished is not None:
                pool.append(polished)
    costs = np.array([_exact_cost(Ps, w, x, q) for x in pool])
    tol_w = cfg.grad_tol * float(w.sum())
    # Candidates whose costs agree to 1e-10 relative are numerically
    # indistinguishable; prefer one that carries an optimality certificate.
    order = np.argsort(costs, kind="stable")
    ties = [int(k) for k in order if costs[k] <= costs[order[0]] * (1.0 + 1e-10)]
    best, converged, detail = ties[0], False, {}
    for k in ties:
        _, g = kernels.smoothed_cost_grad(Ps, w, np.ascontiguousarray(pool[k]), q.q, eps)
        grad_norm = _dual_norm(g, q)
        if k == ties[0]:
            detail["grad_norm"] = grad_norm
        if grad_norm <= tol_w:
            best, converged, detail = k, True, {"grad_norm": grad_norm}
            break
        # minimizers need not be unique (e.g. n = 2) and may sit on a data
        # point, where the subgradient test certifies them exactly
        if k < m:
            slack = _data_point_certificate(Ps, w, k, q)
            if slack <= 1e-9 * float(w.sum()):
                best, converged, detail = k, True, {"data_point_slack": slack}
                break
    x = pool[best]
    if not converged:
        log.warning("optimal_facility: no optimality certificate (%s)", detail)
    return FacilityResult(center + scale * x, scale * costs[best], bool(converged), "lbfgs", detail)


def bounding_box(P: Any, pad: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise min and max of the points, widened by ``pad``.

    Clipping a facility into this box coordinatewise never increases any L_q
    distance to a point inside it, so the box contains a minimizer.
    """
    P = as_instance(P)
    return P.points.min(axis=0) - pad, P.points.max(axis=0) + pad


def grid_oracle(P: Any, q: Any, lo: Any, hi: Any, resolution: float) -> tuple[np.ndarray, float]:
    """Brute-force minimum of the social cost over the grid ``lo + k * resolution``.

    The grid includes ``hi`` when ``hi - lo`` is a multiple of the resolution.
    Only for d <= 4.
    """
    P = as_instance(P)
    q = as_order(q)
    if P.d > GRID_MAX_DIM:
        raise ValueError(f"grid oracle supports d <= {GRID_MAX_DIM}, got d={P.d}")
    lo = as_point(lo)
    hi = as_point(hi)
    if lo.shape[0] != P.d or hi.shape[0] != P.d:
        raise ValueError("grid bounds must match the instance dimension")
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if np.any(hi < lo):
        raise ValueError("grid is empty: need lo <= hi componentwise")
    counts = np.floor((hi - lo) / resolution + 1e-9).astype(np.int64) + 1
    total = int(np.prod(counts.astype(np.float64)))
    if total > GRID_MAX_POINTS:
        raise ValueError(f"grid has {total} points, limit is {GRID_MAX_POINTS}")
    pt, cost = kernels.grid_min(P.points, np.ascontiguousarray(P.weight_array), lo, float(resolution), counts, q.q)
    return np.asarray(pt, dtype=np.float64), float(cost)


@dataclass(frozen=True)
class EvalReport:
    """Mechanism output against the (numerical) optimum on one instance."""

    mechanism_point: np.ndarray
    optimal_point: np.ndarray
    sc_mechanism: float
    sc_optimal: float
    empirical_ratio: float
    theoretical_ub: float
    q: NormOrder
    certified: bool = True
    mechanism: str = "median"
    tie_break: str = TieBreak.LOWER.value

    def as_dict(self) -> dict:
        return {
            "q": str(self.q),
            "mechanism": self.mechanism,
            "tie_break": self.tie_break,
            "mechanism_point": self.mechanism_point.tolist(),
            "optimal_point": self.optimal_point.tolist(),
            "sc_mechanism": self.sc_mechanism,
            "sc_optimal": self.sc_optimal,
            "empirical_ratio": self.empirical_ratio,
            "theoretical_ub": self.theoretical_ub,
            "certified": self.certified,
        }


def empirical_ratio(
    P: Any,
    q: Any,
    cfg: SolverConfig | None = None,
    tb: TieBreak | str = TieBreak.LOWER,
    mechanism: Mechanism | None = None,
    theoretical_ub: float | None = None,
    optimum: Any | None = None,
) -> EvalReport:
    """SC(mechanism) / SC(optimum) on ``P``.

    Args:
        mechanism: defaults to the coordinate median with tie-break ``tb``.
        theoretical_ub: defaults to ``ub(q)``.
        optimum: a known optimal facility; when given, the solver is skipped
            (the point is still compared against the mechanism output).
    """
    P = as_instance(P)
    q = as_order(q)
    tb = TieBreak.parse(tb)
    mech = mechanism or median_mechanism(tb)
    m = np.asarray(mech(P), dtype=np.float64) if mechanism else coordinate_median(P, tb)
    sc_m = social_cost(P, m, q)
    if optimum is not None:
        f = as_point(optimum)
        sc_f = social_cost(P, f, q)
        certified = True
        if sc_m < sc_f:
            f, sc_f = m.copy(), sc_m
    else:
        res = optimal_facility(P, q, cfg, candidates=[m])
        f, sc_f, certified = res.point, res.cost, res.converged
    bound = ub(q).ub if theoretical_ub is None else float(theoretical_ub)
    ratio = 1.0 if sc_f <= 0.0 else sc_m / sc_f
    return EvalReport(m, f, sc_m, sc_f, ratio, bound, q, certified, getattr(mech, "__name__", "mechanism"), tb.value)
