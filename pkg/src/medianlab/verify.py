"""Certificates and stress tests for the median's worst-case behaviour.

* :func:`certificate_check` — is ``min_{a in [0, z]} u(a) >= 0`` for a given
  lambda, i.e. is ``1/lambda`` a valid ratio bound?
* :func:`strategyproofness_suite` — random unilateral deviations.
* :func:`adversarial_search` — local search over structured worst cases.
* :func:`lb_sweep` — predicted vs built lower-bound ratios across dimensions.
* :func:`single_point_trials` — closed-form value of the single-point objective
  ``g(p) = ||p - f|| - lambda ||p||`` at its structured optimum.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from medianlab.bounds import (
    RelaxedProblem,
    bracketed_newton,
    lb_ratio,
    u_func,
    u_prime,
    u_second,
    ub,
)
from medianlab.instances import gen_lb_instance, gen_linf_instance
from medianlab.mechanisms import Instance, Mechanism, deviation_cost_delta
from medianlab.norms import NormOrder, as_order, lq_norm
from medianlab.optfac import SolverConfig, empirical_ratio

log = logging.getLogger(__name__)

CERT_TOL = 1e-9
SP_TOL = 1e-9


# ---------------------------------------------------------------------------
# signatures


@dataclass(frozen=True)
class SignVector:
    """Coordinate signs of a point; zero coordinates count as -1."""

    signs: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.signs, dtype=np.int8).reshape(-1)
        if s.size == 0 or not np.all(np.abs(s) == 1):
            raise ValueError("sign vector entries must be -1 or +1")
        s.flags.writeable = False
        object.__setattr__(self, "signs", s)

    @classmethod
    def of(cls, p: Any) -> SignVector:
        return cls(np.where(np.asarray(p, dtype=np.float64) > 0, 1, -1))

    @property
    def positive_set(self) -> np.ndarray:
        return np.flatnonzero(self.signs > 0)


def signature_balance(P: Instance) -> np.ndarray:
    """Per-coordinate sum of signatures; all zeros means every coordinate is balanced."""
    return np.where(P.points > 0, 1, -1).sum(axis=0)


# ---------------------------------------------------------------------------
# relaxation certificate


@dataclass(frozen=True)
class CertificateReport:
    q: NormOrder
    lam: float
    min_u: float
    argmin_a: float
    z: float
    passed: bool


def _u_grid(a: np.ndarray, rp: RelaxedProblem) -> np.ndarray:
    r = 1.0 / rp.q.q
    return rp.delta * np.power(1.0 - a, r) - np.power(a, r) - 1.0 + 2.0 * a


def certificate_check(q: Any, lam: float, grid_size: int = 10_000) -> CertificateReport:
    """Minimize u over [0, z] by a dense grid plus a Newton polish of u' = 0.

    Passing (``min_u >= -1e-9``) certifies that the median's ratio is at most
    ``1/lam`` for this q.
    """
    q = as_order(q)
    if q.is_one or q.is_inf:
        raise ValueError("certificate_check needs a finite q > 1")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    if grid_size < 1000:
        raise ValueError("grid_size must be >= 1000")
    rp = RelaxedProblem.from_lambda(q, lam)
    a = np.linspace(0.0, rp.z, grid_size + 1)
    vals = _u_grid(a, rp)
    k = int(np.argmin(vals))
    best_a, best_u = float(a[k]), float(vals[k])
    lo, hi = float(a[max(k - 1, 0)]), float(a[min(k + 1, grid_size)])
    lo = max(lo, 1e-300)
    try:
        up_lo, up_hi = u_prime(lo, rp), u_prime(hi, rp)
        if up_lo < 0.0 < up_hi:
            root = bracketed_newton(lambda x: u_prime(x, rp), lambda x: u_second(x, rp), lo, hi, ftol=0.0)
            val = u_func(root, rp)
            if val < best_u:
                best_a, best_u = root, val
    except (ValueError, OverflowError, ZeroDivisionError):
        pass
    return CertificateReport(q, float(lam), best_u, best_a, rp.z, best_u >= -CERT_TOL)


def u_prime_sign_changes(q: Any, lam: float, samples: int = 10_000) -> int:
    """Number of sign changes of u' on a dense interior grid of (0, z)."""
    rp = RelaxedProblem.from_lambda(q, lam)
    r = 1.0 / rp.q.q
    a = np.linspace(0.0, rp.z, samples + 2)[1:-1]
    up = r * (-rp.delta * np.power(1.0 - a, r - 1.0) - np.power(a, r - 1.0)) + 2.0
    s = np.sign(up)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


def h_curvature_split(q: Any, lam: float, step: float = 1e-5, samples: int = 400, margin: float = 0.01) -> tuple[float, float]:
    """Finite-difference h'' on [0.01, z - margin] and [z + margin, 0.99].

    Returns ``(min h'' on the left part, max h'' on the right part)``; the
    relaxed objective is convex then concave when the first is >= 0 and the
    second <= 0.
    """
    rp = RelaxedProblem.from_lambda(q, lam)
    r = 1.0 / rp.q.q

    def h(x: np.ndarray) -> np.ndarray:
        return rp.lam * (rp.delta * np.power(1.0 - x, r) - np.power(x, r))

    def h2(x: np.ndarray) -> np.ndarray:
        return (h(x + step) - 2.0 * h(x) + h(x - step)) / (step * step)

    left = np.linspace(0.01, rp.z - margin, samples) if rp.z - margin > 0.01 else np.array([])
    right = np.linspace(rp.z + margin, 0.99, samples)
    lmin = float(h2(left).min()) if left.size else math.inf
    return lmin, float(h2(right).max())


# ---------------------------------------------------------------------------
# strategy-proofness


@dataclass(frozen=True)
class SPResult:
    trials: int
    violations: int
    worst_delta: float
    example: dict | None = None


def mean_mechanism() -> Mechanism:
    """Coordinate-wise weighted mean. Not strategy-proof; used to test the harness."""

    def mech(P: Instance) -> np.ndarray:
        return np.average(P.points, axis=0, weights=P.weight_array)

    mech.__name__ = "mean"
    return mech


def _random_instance(rng: np.random.Generator, d: int, n: int) -> np.ndarray:
    if rng.random() < 0.5:
        # a small integer lattice makes coordinate ties common
        return rng.integers(-3, 4, size=(n, d)).astype(np.float64)
    return rng.normal(size=(n, d))


def _random_report(rng: np.random.Generator, pts: np.ndarray, i: int) -> np.ndarray:
    d = pts.shape[1]
    mode = rng.integers(4)
    if mode == 0:
        return pts[i] + rng.normal(scale=0.5, size=d)
    if mode == 1:
        return rng.normal(scale=3.0, size=d)
    if mode == 2:
        # copy coordinates from other agents: lands exactly on order statistics
        return pts[rng.integers(pts.shape[0], size=d), np.arange(d)].copy()
    return pts[i] + rng.integers(-2, 3, size=d).astype(np.float64)


def strategyproofness_suite(
    mech: Mechanism,
    trials: int = 10_000,
    seed: int = 0,
    dims: Sequence[int] = (1, 2, 3, 4, 5),
    sizes: Sequence[int] = (1, 2, 3, 4, 5, 6, 7),
    q: Any = 2,
) -> SPResult:
    """Count random unilateral deviations that lower the deviator's cost by more than 1e-9."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    q = as_order(q)
    rng = np.random.default_rng(seed)
    violations = 0
    worst = math.inf
    example = None
    for _ in range(trials):
        d = int(rng.choice(dims))
        n = int(rng.choice(sizes))
        pts = _random_instance(rng, d, n)
        P = Instance(pts)
        i = int(rng.integers(n))
        report = _random_report(rng, pts, i)
        delta = deviation_cost_delta(P, i, report, mech, q)
        if delta < worst:
            worst = delta
        if delta < -SP_TOL:
            violations += 1
            if example is None:
                example = {"points": pts.tolist(), "agent": i, "report": report.tolist(), "delta": delta}
    return SPResult(trials, violations, float(worst), example)


# ---------------------------------------------------------------------------
# adversarial search


@dataclass(frozen=True)
class SearchResult:
    best_instance: Instance
    best_ratio: float
    surrogate_ratio: float
    restarts_used: int
    q: NormOrder
    d: int
    n: int
    sizes: dict = field(default_factory=dict)
    validation_ratio: float | None = None


def _size_profile(q: NormOrder, d: int, rho: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For every support size s = 0..d, the best Type-I height t = 1/(1-c) against
    the target facility ``ones`` and the resulting (||p||, ||p - ones||)."""
    s = np.arange(d + 1, dtype=np.float64)
    e = d - s
    t = np.ones(d + 1)
    if q.is_inf:
        t[(s > 0) & (s < d)] = 2.0
        A = np.where(s > 0, t, 0.0)
        B = np.where(s > 0, np.where(s < d, np.maximum(t - 1.0, 1.0), t - 1.0), 1.0)
        return t, A, B
    if q.is_one:
        A = s.copy()
        B = e.copy()
        return t, A, B
    qq = q.q
    lam = 1.0 / max(rho, 1.0 + 1e-12)
    L = lam ** q.qq1
    K = L / (1.0 - L)
    mid = (s > 0) & (s < d)
    t[mid] = 1.0 + np.power(e[mid] / s[mid] * K, 1.0 / qq)
    A = np.where(s > 0, t * np.power(s, 1.0 / qq), 0.0)
    B = np.power(np.power(t - 1.0, qq) * s + e, 1.0 / qq)
    B[0] = d ** (1.0 / qq)
    return t, A, B


def surrogate_ratio(q: Any, d: int, counts: np.ndarray, iters: int = 60) -> tuple[float, np.ndarray]:
    """Best ratio SC(origin)/SC(ones) for a fixed histogram of support sizes.

    ``counts[s]`` points have s positive coordinates. Heights are optimized
    exactly by Dinkelbach iteration (per-size closed-form maximizer of
    ``||p|| - rho ||p - ones||``).
    """
    q = as_order(q)
    rho = 1.5
    t = np.ones(d + 1)
    for _ in range(iters):
        t, A, B = _size_profile(q, d, rho)
        den = float(counts @ B)
        new = float(counts @ A) / den if den > 0 else 1.0
        if abs(new - rho) <= 1e-14 * new:
            rho = new
            break
        rho = new
    return rho, t


def _fill_support(sizes: np.ndarray, d: int, perm: np.ndarray) -> np.ndarray:
    """Boolean (n, d) mask with row sums ``sizes``; consecutive wrap-around
    blocks give every column the same count when ``sum(sizes)`` is a multiple of d."""
    n = sizes.shape[0]
    mask = np.zeros((n, d), dtype=bool)
    pos = 0
    for i, s in enumerate(sizes):
        if s:
            mask[i, perm[(pos + np.arange(s)) % d]] = True
            pos += int(s)
    return mask


def realize(q: Any, d: int, sizes: np.ndarray, heights: np.ndarray, seed: int = 0) -> Instance:
    """Instance whose point i is positive (at height ``heights[sizes[i]]``) on sizes[i] coordinates."""
    rng = np.random.default_rng(seed)
    mask = _fill_support(np.asarray(sizes), d, rng.permutation(d))
    pts = np.where(mask, heights[np.asarray(sizes)][:, None], 0.0)
    return Instance(pts, None, {"generator": "adversarial_search", "q": str(as_order(q)), "d": d, "seed": int(seed)})


def _upper_hull(y: np.ndarray) -> list[int]:
    """Indices of the upper concave envelope of the points (s, y[s])."""
    hull: list[int] = []
    for x in range(len(y)):
        while len(hull) >= 2:
            x1, x2 = hull[-2], hull[-1]
            # drop x2 if it lies on or below the chord x1 -> x
            if (y[x2] - y[x1]) * (x - x1) <= (y[x] - y[x1]) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(x)
    return hull


def _hull_allocation(phi: np.ndarray, n: int, total: int) -> np.ndarray:
    """Sizes maximizing sum(phi[s_i]) subject to sum(s_i) = total, up to one leftover point.

    The continuous relaxation is solved by the concave envelope of phi: all
    mass sits on the two envelope vertices around the mean size.
    """
    hull = _upper_hull(phi)
    mu = total / n
    j = int(np.searchsorted(hull, mu))
    s2 = hull[min(j, len(hull) - 1)]
    s1 = hull[max(j - 1, 0)] if hull[min(j, len(hull) - 1)] != mu else s2
    sizes = np.full(n, s1)
    if s2 > s1:
        n2 = (total - n * s1) // (s2 - s1)
        sizes[:n2] = s2
    sizes[-1] += total - int(sizes.sum())
    return sizes


def _climb(q: NormOrder, d: int, n: int, rng: np.random.Generator, rounds: int, moves: int) -> tuple[float, np.ndarray]:
    """Dinkelbach-style local search over support sizes.

    For the current ratio rho, every size s has a value ``phi(s) = ||p_s|| -
    rho ||p_s - ones||`` (heights already optimal for rho). A move picks two
    points and re-splits their combined support to maximize ``phi(x) +
    phi(T - x)``; any increase of sum(phi) raises the ratio. rho is refreshed
    after every round.
    """
    total = n * d // 2
    sizes = np.full(n, d // 2)
    sizes[rng.permutation(n)[: total - int(sizes.sum())]] += 1
    for _ in range(4 * n):  # random balanced start
        a, b = rng.integers(n, size=2)
        amt = min(int(rng.integers(0, d + 1)), sizes[a], d - sizes[b])
        if a != b:
            sizes[a] -= amt
            sizes[b] += amt
    best, _ = surrogate_ratio(q, d, np.bincount(sizes, minlength=d + 1).astype(np.float64))
    best_sizes = sizes.copy()
    rho = best
    for _ in range(rounds):
        _, A, B = _size_profile(q, d, rho)
        phi = A - rho * B
        hull_sizes = _hull_allocation(phi, n, total)
        if 0 <= hull_sizes.min() and hull_sizes.max() <= d:
            val, _ = surrogate_ratio(q, d, np.bincount(hull_sizes, minlength=d + 1).astype(np.float64))
            cur, _ = surrogate_ratio(q, d, np.bincount(sizes, minlength=d + 1).astype(np.float64))
            if val > cur:
                sizes = rng.permutation(hull_sizes)
        for _ in range(moves):
            a, b = rng.integers(n, size=2)
            if a == b:
                continue
            T = sizes[a] + sizes[b]
            x = np.arange(max(0, T - d), min(d, T) + 1)
            k = int(np.argmax(phi[x] + phi[T - x]))
            sizes[a], sizes[b] = x[k], T - x[k]
        rho, _ = surrogate_ratio(q, d, np.bincount(sizes, minlength=d + 1).astype(np.float64))
        if rho > best * (1.0 + 1e-13):
            best, best_sizes = rho, sizes.copy()
        else:
            break
    return best, best_sizes


def _unstructured_pass(P: Instance, q: NormOrder, cfg: SolverConfig, rng: np.random.Generator, steps: int) -> float:
    """Random coordinate perturbations of the best instance, keeping improvements
    in the true ratio (fresh optimum each time). Guards against the structured
    search space missing better finite-n configurations."""
    pts = P.points.copy()
    best = empirical_ratio(P, q, cfg).empirical_ratio
    for _ in range(steps):
        cand = pts.copy()
        i, j = rng.integers(cand.shape[0]), rng.integers(cand.shape[1])
        cand[i, j] += rng.normal(scale=0.25)
        val = empirical_ratio(Instance(cand), q, cfg).empirical_ratio
        if val > best:
            best, pts = val, cand
    return best


def adversarial_search(
    q: Any,
    d: int,
    n: int,
    restarts: int = 20,
    seed: int = 0,
    rounds: int = 50,
    cfg: SolverConfig | None = None,
    validate: bool = False,
) -> SearchResult:
    """Search balanced structured configurations for a large median/optimum ratio.

    Every point is 0 off its positive set and ``f_j/(1-c)`` on it, against the
    target facility ``ones``; each coordinate is positive for exactly n/2
    points so the (lower) median is the origin. With the target fixed the ratio
    depends only on the histogram of positive-set sizes, which is what the
    hill climb moves (shifting coordinates between two points keeps every
    column balanced). The winner is re-scored with a fresh optimal-facility
    solve, and that re-scored value is reported.
    """
    q = as_order(q)
    d, n = int(d), int(n)
    if n < 2 or n % 2:
        raise ValueError(f"balanced signatures need an even n >= 2, got n={n}")
    if d < 1:
        raise ValueError("d must be >= 1")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    cfg = cfg or SolverConfig(seed=seed)
    best_val, best_sizes = -math.inf, None
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        val, sizes = _climb(q, d, n, rng, rounds, 4 * n)
        if val > best_val:
            best_val, best_sizes = val, sizes.copy()
    counts = np.bincount(best_sizes, minlength=d + 1).astype(np.float64)
    best_val, heights = surrogate_ratio(q, d, counts)
    inst = realize(q, d, best_sizes, heights, seed)
    rep = empirical_ratio(inst, q, cfg)
    validation = None
    if validate and d <= 6:
        validation = _unstructured_pass(inst, q, cfg, np.random.default_rng([seed, restarts]), 200)
    hist = {int(s): int(c) for s, c in enumerate(counts) if c}
    return SearchResult(inst, rep.empirical_ratio, best_val, restarts, q, d, n, hist, validation)


# ---------------------------------------------------------------------------
# lower-bound sweep


@dataclass(frozen=True)
class SweepRow:
    d: int
    predicted_lb: float
    empirical_lb: float | None
    ub: float

    @property
    def gap(self) -> float:
        return self.ub - self.predicted_lb

    @property
    def rel_error(self) -> float | None:
        if self.empirical_lb is None:
            return None
        return abs(self.empirical_lb - self.predicted_lb) / self.predicted_lb


@dataclass(frozen=True)
class SweepResult:
    q: NormOrder
    rows: list
    fitted_c: float
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def lb_sweep(
    q: Any,
    d_list: Sequence[int],
    n: int = 2000,
    seed: int = 0,
    cfg: SolverConfig | None = None,
    max_build_d: int = 4096,
    rel_tol: float = 0.02,
) -> SweepResult:
    """Predicted vs built lower-bound ratios over ``d_list``.

    Rows whose d is infeasible for the construction are skipped with a
    warning; rows with d > ``max_build_d`` report the formula only. The fitted
    constant is the least-squares C in ``gap ~ C/d``.
    """
    q = as_order(q)
    cfg = cfg or SolverConfig(seed=seed)
    bound = ub(q).ub
    rows = []
    for d in sorted(set(int(x) for x in d_list)):
        try:
            pred = lb_ratio(q, d)
        except ValueError as exc:
            warnings.warn(f"skipping d={d}: {exc}", stacklevel=2)
            continue
        emp = None
        if d <= max_build_d and not q.is_one:
            inst = _build_lb(q, d, n, seed)
            emp = empirical_ratio(inst, q, cfg).empirical_ratio
        rows.append(SweepRow(d, pred, emp, bound))
    preds = np.array([r.predicted_lb for r in rows])
    gaps = np.array([r.gap for r in rows])
    ds = np.array([r.d for r in rows], dtype=np.float64)
    fitted = float((gaps / ds).sum() / (1.0 / ds**2).sum()) if rows else math.nan
    checks = {
        "predicted_nondecreasing": bool(np.all(np.diff(preds) >= -1e-12)),
        "gap_nonincreasing": bool(np.all(np.diff(gaps) <= 1e-12)),
        "predicted_le_ub": bool(np.all(preds <= bound + 1e-9)),
        "empirical_matches_predicted": all(r.rel_error is None or r.rel_error <= rel_tol for r in rows),
        "empirical_le_ub": all(r.empirical_lb is None or r.empirical_lb <= bound + 1e-6 for r in rows),
    }
    return SweepResult(q, rows, fitted, checks)


def _build_lb(q: NormOrder, d: int, n: int, seed: int) -> Instance:
    if q.is_inf:
        return gen_linf_instance(d, n, seed)
    last = None
    for extra in range(50):
        try:
            return gen_lb_instance(q, d, n + extra, seed)
        except ValueError as exc:  # rounding pushed a coordinate past n/2
            last = exc
    raise ValueError(f"could not build a valid instance near n={n}: {last}")


# ---------------------------------------------------------------------------
# closed form of the single-point objective


@dataclass(frozen=True)
class SinglePointResult:
    trials: int
    max_closed_form_error: float
    min_lower_bound_slack: float


def single_point_closed_form(f: np.ndarray, S: np.ndarray, lam: float, q: NormOrder) -> tuple[float, float]:
    """(g at the structured optimum, predicted closed form) for unit f > 0 and support S."""
    qq = q.q
    L = lam**q.qq1
    dS = float(np.sum(f[S] ** qq))
    dSbar = 1.0 - dS
    ratio = (dSbar / dS * L / (1.0 - L)) ** (1.0 / qq)  # c/(1-c)
    p = np.zeros_like(f)
    p[S] = f[S] * (1.0 + ratio)
    g = lq_norm(p - f, q) - lam * lq_norm(p, q)
    closed = (1.0 - L) ** q.q1q * dSbar ** (1.0 / qq) - lam * dS ** (1.0 / qq)
    return g, closed


def single_point_trials(trials: int = 200, seed: int = 0, d_max: int = 12) -> SinglePointResult:
    """Randomized check of the closed form and of the all-nonpositive lower bound."""
    rng = np.random.default_rng(seed)
    worst_err = 0.0
    min_slack = math.inf
    for _ in range(trials):
        q = as_order(float(rng.uniform(1.05, 8.0)))
        lam = float(rng.uniform(0.05, 0.95))
        d = int(rng.integers(2, d_max + 1))
        f = rng.uniform(0.05, 1.0, size=d)
        f /= lq_norm(f, q)
        S = rng.permutation(d)[: int(rng.integers(1, d))]
        g, closed = single_point_closed_form(f, S, lam, q)
        worst_err = max(worst_err, abs(g - closed))

        p = -np.abs(rng.normal(size=d)) * rng.choice([0.0, 0.1, 1.0, 10.0])
        g2 = lq_norm(p - f, q) - lam * lq_norm(p, q)
        bound = (1.0 - lam**q.qq1) ** q.q1q
        min_slack = min(min_slack, g2 - bound)
    return SinglePointResult(trials, worst_err, min_slack)

