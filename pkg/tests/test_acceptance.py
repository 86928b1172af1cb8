"""End-to-end acceptance criteria, one test per criterion.

Each test records its verdict in ``conftest.ACCEPTANCE`` (summarised at the
end of the run), prints a one-line PASS/FAIL and then asserts.
"""

import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from medianlab.bounds import (
    comparison_curves,
    consistency_branches,
    consistency_bound,
    eq8_residuals,
    lb_ratio,
    r_a,
    r_b,
    robustness_bound,
    ub,
)
from medianlab.instances import gen_linf_instance
from medianlab.mechanisms import cmp_mechanism, coordinate_median, median_mechanism
from medianlab.norms import social_cost
from medianlab.optfac import bounding_box, empirical_ratio, grid_oracle, optimal_facility
from medianlab.verify import (
    _build_lb,
    adversarial_search,
    certificate_check,
    single_point_trials,
    mean_mechanism,
    strategyproofness_suite,
)
from medianlab.norms import as_order
from oracle_values import A_STAR_2, UB2

Q_GRID = [1.1, 1.5, 2.0, 3.0, 5.0, 10.0, 50.0]


def record(num, ok, desc, started):
    ACCEPTANCE[num] = (bool(ok), desc)
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f}s) {desc}")
    assert ok, desc


def test_criterion_01_golden_bounds():
    t0 = time.perf_counter()
    u2, a2 = ub(2).ub, ub(2).a_star
    u1000 = ub(1000).ub
    ok = (
        abs(u2 - UB2) <= 1e-9
        and abs(a2 - A_STAR_2) <= 1e-9
        and ub(1).ub == 1.0
        and ub("inf").ub == 3.0
        and 2.90 <= u1000 < 3.00
    )
    record(1, ok, f"golden bounds: ub(2)={u2!r}, a_star(2)={a2!r}, ub(1000)={u1000:.6f}", t0)


def test_criterion_02_system_residuals():
    t0 = time.perf_counter()
    worst = 0.0
    for q in Q_GRID:
        s = ub(q)
        worst = max(worst, *map(abs, eq8_residuals(s.a_star, s.delta_star, q)))
    vals = [ub(q).ub for q in Q_GRID]
    monotone = all(a <= b for a, b in zip(vals, vals[1:]))
    record(2, worst <= 1e-9 and monotone, f"tangency residuals max {worst:.2e}, ub nondecreasing={monotone}", t0)


def test_criterion_03_certificate_tangency():
    t0 = time.perf_counter()
    bad = []
    for q in Q_GRID:
        s = ub(q)
        rep = certificate_check(q, s.lambda_star)
        if not (rep.passed and abs(rep.min_u) <= 1e-8 and abs(rep.argmin_a - s.a_star) <= 1e-5):
            bad.append(f"q={q} tight")
        if certificate_check(q, 1.01 * s.lambda_star).passed:
            bad.append(f"q={q} perturbed")
    record(3, not bad, f"certificate tangent at lambda_star and failing at 1.01 lambda_star for {len(Q_GRID)} orders; problems={bad}", t0)


def test_criterion_04_linf_lower_bound():
    t0 = time.perf_counter()
    got, at_ones, balanced = {}, [], {}
    for d in (1, 2, 10, 100):
        P = gen_linf_instance(d, 0, seed=0)
        got[d] = empirical_ratio(P, "inf").empirical_ratio
        at_ones.append(bool(np.all(coordinate_median(P) == 1.0)))
        if d >= 2:
            B = gen_linf_instance(d, 0, seed=0, counts="balanced")
            balanced[d] = empirical_ratio(B, "inf").empirical_ratio
    ok = all(abs(got[d] - (3 - 1 / d)) <= 1e-9 for d in got)
    shown = ", ".join(f"d={d}: {v:.4g} (want {3 - 1 / d:.4g})" for d, v in got.items())
    desc = (
        f"max-norm construction ratios {shown}; median is the all-ones point for {sum(at_ones)}/4 dims "
        f"(type fractions give each coordinate a positive majority); "
        f"largest balanced variant reaches {', '.join(f'{d}: {v:.4g}' for d, v in balanced.items())}"
    )
    record(4, ok, desc, t0)


def test_criterion_05_general_lb_convergence():
    t0 = time.perf_counter()
    bound = ub(2).ub
    ds = [8, 16, 64, 256, 1024, 10**6]
    vals = [lb_ratio(2, d) for d in ds]
    nondecr = all(a <= b for a, b in zip(vals, vals[1:]))
    below = all(v <= bound for v in vals)
    tight = bound - vals[-1] <= 1e-3
    errs = {}
    for d in (8, 64, 256):
        P = _build_lb(as_order(2), d, 4000, 0)
        rep = empirical_ratio(P, 2)
        errs[d] = abs(rep.empirical_ratio - lb_ratio(2, d)) / lb_ratio(2, d)
    built = all(e <= 0.02 for e in errs.values())
    desc = (
        f"lb_ratio nondecreasing={nondecr}, <= ub={below}, gap at 1e6 = {bound - vals[-1]:.2e}; "
        f"built rel. errors {', '.join(f'{d}:{e:.2e}' for d, e in errs.items())}"
    )
    record(5, nondecr and below and tight and built, desc, t0)


def test_criterion_06_prediction_bounds():
    t0 = time.perf_counter()
    ok0 = abs(consistency_bound(0) - UB2) <= 1e-9 and abs(robustness_bound(0) - UB2) <= 1e-9
    low, high = consistency_branches(0.5)
    cont = abs(low - high) <= 1e-12
    target = UB2 / math.sqrt(2)
    ratios0 = abs(r_a(0) - target) <= 1e-9 and abs(r_b(0) - target) <= 1e-9
    rows = comparison_curves(np.linspace(0, 0.999, 1000))
    ra_max = max(r.r_a for r in rows)
    rb = [r.r_b for r in rows]
    decreasing = all(x > y for x, y in zip(rb, rb[1:]))
    ok = ok0 and cont and ratios0 and ra_max < 1.11 and decreasing
    record(6, ok, f"c=0 recovers ub(2)={ok0}, branch gap {abs(low - high):.1e}, max r_a={ra_max:.5f}, r_b decreasing={decreasing}", t0)


def test_criterion_07_strategyproofness():
    t0 = time.perf_counter()
    counts = {}
    for q in (1, 2, "inf"):
        counts[f"median q={q}"] = strategyproofness_suite(median_mechanism(), 10_000, seed=7, q=q).violations
    for c in (0.25, 0.5, 0.75):
        mech = cmp_mechanism(c, lambda d: np.full(d, 0.5))
        counts[f"cmp c={c}"] = strategyproofness_suite(mech, 10_000, seed=8).violations
    mean_v = strategyproofness_suite(mean_mechanism(), 1000, seed=9).violations
    ok = all(v == 0 for v in counts.values()) and mean_v >= 1
    record(7, ok, f"violations {counts}; mean mechanism caught {mean_v} times", t0)


def test_criterion_08_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    qs = [1.0, 2.0, 2.5, math.inf]
    worst_excess, worst_ratio_excess, l1_err = -math.inf, -math.inf, 0.0
    for k in range(50):
        q = qs[k % 4]
        d = int(rng.integers(1, 4))
        n = int(rng.integers(2, 6))
        pts = rng.uniform(0, 1, size=(n, d))
        res = {1: 1e-3, 2: 4e-3, 3: 1e-2}[d]
        lo, hi = bounding_box(pts)
        _, grid_cost = grid_oracle(pts, q, lo, hi, res)
        fac = optimal_facility(pts, q)
        tol = max(1e-4, 3 * res * n)
        worst_excess = max(worst_excess, abs(fac.cost - grid_cost) - tol)
        rep = empirical_ratio(pts, q)
        worst_ratio_excess = max(worst_ratio_excess, rep.empirical_ratio - ub(q).ub)
        if q == 1.0:
            med_cost = social_cost(pts, coordinate_median(pts), 1)
            l1_err = max(l1_err, med_cost - min(grid_cost, fac.cost))
    ok = worst_excess <= 0 and worst_ratio_excess <= 1e-6 and l1_err <= 1e-6
    desc = f"50 instances: max(|cost-grid| - tol)={worst_excess:.2e}, max(ratio-ub)={worst_ratio_excess:.2e}, L1 median excess={l1_err:.1e}"
    record(8, ok, desc, t0)


def test_criterion_09_single_point_closed_form():
    t0 = time.perf_counter()
    res = single_point_trials(200, seed=0)
    ok = res.max_closed_form_error <= 1e-8 and res.min_lower_bound_slack >= -1e-8
    record(9, ok, f"200 trials: closed-form error {res.max_closed_form_error:.1e}, min lower-bound slack {res.min_lower_bound_slack:.2e}", t0)


def test_criterion_10_adversarial_search():
    t0 = time.perf_counter()
    floor = lb_ratio(2, 100) - 0.02
    r2 = adversarial_search(2, 100, 200, restarts=20, seed=0).best_ratio
    r1 = adversarial_search(1, 20, 40, restarts=20, seed=0).best_ratio
    ok = floor <= r2 <= ub(2).ub + 1e-6 and abs(r1 - 1) <= 1e-6
    record(10, ok, f"search q=2: {r2:.6f} (floor {floor:.4f}, ub {ub(2).ub:.6f}); q=1: {r1!r}", t0)
