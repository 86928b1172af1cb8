"""Tight approximation bounds for the coordinate-wise median in L_q(R^d).

The worst case of the median is captured by the one-dimensional function

    u(a) = delta * (1 - a)**(1/q) - a**(1/q) - 1 + 2*a,

where ``delta = (lambda**(-q/(q-1)) - 1)**((q-1)/q)``. The bound ``ub(q)`` is
``1/lambda_star`` for the ``lambda_star`` at which ``min_{a in [0, z]} u(a)`` touches
zero, i.e. ``u(a_star) = u'(a_star) = 0``. Eliminating ``delta`` gives a scalar
equation for ``a_star`` alone::

    2 (1 - 1/q) a + (1/q) a**((1-q)/q) - 2 + 1/q = 0

which is solved by a bracketed Newton iteration, after which ``delta_star`` and
``lambda_star`` follow in closed form.

The same machinery at q = 2 gives the consistency and robustness of the
prediction-augmented median CMP(c).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Iterable, NamedTuple

from medianlab.norms import NormOrder, as_order

A_STAR_TOL = 1e-12


def _finite_q(q: Any, what: str) -> NormOrder:
    q = as_order(q)
    if q.is_one or q.is_inf:
        raise ValueError(f"{what} needs a finite q > 1, got q={q}")
    return q


def delta_of_lambda(lam: float, q: Any) -> float:
    """delta(lambda) = (lambda^(-q/(q-1)) - 1)^((q-1)/q); decreasing on (0, 1)."""
    q = _finite_q(q, "delta_of_lambda")
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    return math.pow(math.pow(lam, -q.qq1) - 1.0, q.q1q)


def lambda_of_delta(delta: float, q: Any) -> float:
    """Inverse of :func:`delta_of_lambda`: (1 + delta^(q/(q-1)))^(-(q-1)/q)."""
    q = _finite_q(q, "lambda_of_delta")
    return math.pow(1.0 + math.pow(delta, q.qq1), -q.q1q)


@dataclass(frozen=True)
class RelaxedProblem:
    """Parameters of the relaxed program for one (q, lambda)."""

    q: NormOrder
    lam: float
    delta: float
    z: float

    @classmethod
    def from_lambda(cls, q: Any, lam: float) -> RelaxedProblem:
        q = _finite_q(q, "RelaxedProblem")
        delta = delta_of_lambda(lam, q)
        e = -q.q / (2.0 * q.q - 1.0)
        t = math.pow(delta, e)
        return cls(q, float(lam), delta, t / (t + 1.0))

    @classmethod
    def from_delta(cls, q: Any, delta: float) -> RelaxedProblem:
        q = _finite_q(q, "RelaxedProblem")
        lam = lambda_of_delta(delta, q)
        e = -q.q / (2.0 * q.q - 1.0)
        t = math.pow(delta, e)
        return cls(q, lam, float(delta), t / (t + 1.0))


def _rq(rp: RelaxedProblem) -> float:
    return 1.0 / rp.q.q


def u_func(a: float, rp: RelaxedProblem) -> float:
    """u(a) = delta (1-a)^(1/q) - a^(1/q) - 1 + 2a."""
    r = _rq(rp)
    return rp.delta * math.pow(1.0 - a, r) - math.pow(a, r) - 1.0 + 2.0 * a


def u_prime(a: float, rp: RelaxedProblem) -> float:
    r = _rq(rp)
    return r * (-rp.delta * math.pow(1.0 - a, r - 1.0) - math.pow(a, r - 1.0)) + 2.0


def u_second(a: float, rp: RelaxedProblem) -> float:
    r = _rq(rp)
    k = r * (1.0 - r)
    return -k * rp.delta * math.pow(1.0 - a, r - 2.0) + k * math.pow(a, r - 2.0)


def h_func(x: float, rp: RelaxedProblem) -> float:
    """h(x) = lambda (delta (1-x)^(1/q) - x^(1/q)); convex on [0, z], concave on [z, 1]."""
    r = _rq(rp)
    return rp.lam * (rp.delta * math.pow(1.0 - x, r) - math.pow(x, r))


def h_second(x: float, rp: RelaxedProblem) -> float:
    """Analytic h''(x) = lambda (q-1)/q^2 (x^-(2q-1)/q - delta (1-x)^-(2q-1)/q)."""
    q = rp.q.q
    e = -(2.0 * q - 1.0) / q
    return rp.lam * (q - 1.0) / (q * q) * (math.pow(x, e) - rp.delta * math.pow(1.0 - x, e))


def bracketed_newton(
    func: Callable[[float], float],
    dfunc: Callable[[float], float],
    lo: float,
    hi: float,
    ftol: float = 0.0,
    xtol: float = 1e-300,
    maxiter: int = 200,
) -> float:
    """Newton's method kept inside a sign-changing bracket.

    Falls back to bisection whenever the Newton step leaves the bracket or
    fails to halve the bracket width fast enough, so it cannot diverge even
    where the derivative blows up at an endpoint.
    """
    flo, fhi = func(lo), func(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ValueError(f"root is not bracketed: f({lo})={flo}, f({hi})={fhi}")
    if flo > 0:  # orient so that func(lo) < 0 < func(hi)
        lo, hi = hi, lo
    x = 0.5 * (lo + hi)
    step_old = abs(hi - lo)
    for _ in range(maxiter):
        fx = func(x)
        if abs(fx) <= ftol:
            return x
        if fx < 0:
            lo = x
        else:
            hi = x
        dfx = dfunc(x)
        cand = x - fx / dfx if dfx != 0.0 and math.isfinite(dfx) else math.nan
        inside = min(lo, hi) < cand < max(lo, hi)
        if inside and abs(cand - x) <= 0.5 * step_old:
            step_old = abs(cand - x)
            x_new = cand
        else:
            x_new = 0.5 * (lo + hi)
            step_old = abs(hi - lo) / 2.0
        if x_new == x or abs(hi - lo) <= xtol:
            return x_new
        x = x_new
    return x


def a_star_equation(a: float, q: Any) -> float:
    """Left-hand side of the scalar equation for a_star:
    2 (1 - 1/q) a + (1/q) a^((1-q)/q) - 2 + 1/q."""
    q = _finite_q(q, "a_star_equation")
    r = 1.0 / q.q
    return 2.0 * (1.0 - r) * a + r * math.pow(a, r - 1.0) - 2.0 + r


def solve_a_star(q: Any) -> float:
    """The unique root of :func:`a_star_equation` in (0, 1/2).

    The left-hand side decreases then increases; its minimum sits at
    ``(2q)^(q/(1-2q))`` and at ``(2q-1)^(-q/(q-1))`` it is strictly positive,
    which gives a tight sign-changing bracket for every finite q > 1.
    """
    q = _finite_q(q, "solve_a_star")
    r = 1.0 / q.q
    lo = math.pow(2.0 * q.q - 1.0, -q.qq1)
    hi = math.pow(2.0 * q.q, q.q / (1.0 - 2.0 * q.q))

    def F(a: float) -> float:
        return 2.0 * (1.0 - r) * a + r * math.pow(a, r - 1.0) - 2.0 + r

    def dF(a: float) -> float:
        return 2.0 * (1.0 - r) + r * (r - 1.0) * math.pow(a, r - 2.0)

    a = bracketed_newton(F, dF, lo, hi, ftol=1e-15)
    res = F(a)
    if not abs(res) <= A_STAR_TOL or not 0.0 < a < 0.5:
        raise ArithmeticError(f"a_star solve failed for q={q}: a={a}, residual={res}")
    return a


def eq8_residuals(a: float, delta: float, q: Any) -> tuple[float, float]:
    """Residuals (u(a), u'(a)) of the tangency system at (a, delta)."""
    rp = RelaxedProblem.from_delta(q, delta)
    return u_func(a, rp), u_prime(a, rp)


def eq9_residual(a: float, delta: float, q: Any) -> float:
    """u'(a) scaled by (1-a):  (1/q)(-delta (1-a)^(1/q) + a^(1/q) - a^((1-q)/q)) + 2 - 2a."""
    r = 1.0 / as_order(q).q
    return r * (-delta * math.pow(1.0 - a, r) + math.pow(a, r) - math.pow(a, r - 1.0)) + 2.0 - 2.0 * a


@dataclass(frozen=True)
class BoundSolution:
    """Solution of the tangency system for one q, with residuals kept for auditing.

    At q = 1 and q = inf the generic pipeline is singular; those rows hold the
    limiting values (``special_case=True``) and NaN residuals.
    """

    q: NormOrder
    a_star: float
    delta_star: float
    lambda_star: float
    ub: float
    residual_u: float
    residual_uprime: float
    residual_a: float
    special_case: bool = False

    def as_dict(self) -> dict:
        return {
            "q": str(self.q),
            "a_star": self.a_star,
            "delta_star": self.delta_star,
            "lambda_star": self.lambda_star,
            "ub": self.ub,
            "residual_u": self.residual_u,
            "residual_uprime": self.residual_uprime,
            "residual_a": self.residual_a,
            "special_case": self.special_case,
        }


def ub(q: Any) -> BoundSolution:
    """ub(q): the dimension-free bound on the median's approximation ratio."""
    q = as_order(q)
    nan = math.nan
    if q.is_one:
        return BoundSolution(q, nan, 1.0, 1.0, 1.0, nan, nan, nan, special_case=True)
    if q.is_inf:
        return BoundSolution(q, 0.0, 2.0, 1.0 / 3.0, 3.0, nan, nan, nan, special_case=True)
    r = 1.0 / q.q
    a = solve_a_star(q)
    delta = (math.pow(a, r) + 1.0 - 2.0 * a) / math.pow(1.0 - a, r)
    lam = lambda_of_delta(delta, q)
    res_u, res_up = eq8_residuals(a, delta, q)
    return BoundSolution(q, a, delta, lam, 1.0 / lam, res_u, res_up, a_star_equation(a, q))


# ---------------------------------------------------------------------------
# lower-bound construction


@dataclass(frozen=True)
class LBParams:
    """Parameters of the two-type worst-case instance for a finite q > 1."""

    q: NormOrder
    a_star: float
    lambda_star: float
    c_star: float
    type1_coord: float
    frac_type1: float
    frac_type2: float


def c_star(q: Any) -> float:
    """c_star = t / (1 + t) with t = ((1-a_star)/a_star * L/(1-L))^(1/q), L = lambda_star^(q/(q-1))."""
    q = _finite_q(q, "c_star")
    sol = ub(q)
    L = math.pow(sol.lambda_star, q.qq1)
    t = math.pow((1.0 - sol.a_star) / sol.a_star * L / (1.0 - L), 1.0 / q.q)
    return t / (1.0 + t)


def lb_params(q: Any) -> LBParams:
    q = _finite_q(q, "lb_params")
    sol = ub(q)
    c = c_star(q)
    a = sol.a_star
    return LBParams(
        q=q,
        a_star=a,
        lambda_star=sol.lambda_star,
        c_star=c,
        type1_coord=1.0 / (1.0 - c),
        frac_type1=1.0 / (2.0 - 2.0 * a),
        frac_type2=(1.0 - 2.0 * a) / (2.0 - 2.0 * a),
    )


def lb_limit_ratio(q: Any) -> float:
    """d -> inf limit of the construction's ratio; equals 1/lambda_star = ub(q)."""
    p = lb_params(q)
    qq = p.q.q
    a, c = p.a_star, p.c_star
    num = math.pow(a, 1.0 / qq) / (1.0 - c) + 1.0 - 2.0 * a
    den = math.pow(math.pow(c / (1.0 - c), qq) * a + 1.0 - a, 1.0 / qq)
    return num / den


def positive_count(q: Any, d: int) -> int:
    """floor(a_star d): number of positive coordinates of a Type I point."""
    return int(math.floor(lb_params(q).a_star * d))


def lb_ratio(q: Any, d: int) -> float:
    """Ratio achieved by the explicit worst-case family in dimension d.

    For q = inf this is the closed-form value 3 - 1/d attached to the
    max-norm construction; for q = 1 every instance has ratio 1.
    """
    q = as_order(q)
    d = int(d)
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if q.is_inf:
        return 3.0 - 1.0 / d
    if q.is_one:
        return 1.0
    p = lb_params(q)
    k = int(math.floor(p.a_star * d))
    if k < 1:
        raise ValueError(f"dimension too small for the construction: floor(a_star d) = floor({p.a_star * d:.4g}) = 0")
    qq = q.q
    c = p.c_star
    num = math.pow(k, 1.0 / qq) / (1.0 - c) + math.pow(d, 1.0 / qq) * (1.0 - 2.0 * p.a_star)
    den = math.pow(math.pow(c / (1.0 - c), qq) * k + (d - k), 1.0 / qq)
    return num / den


# ---------------------------------------------------------------------------
# prediction-augmented median CMP(c), Euclidean norm


def _check_c(c: float) -> float:
    c = float(c)
    if not 0.0 <= c < 1.0:
        raise ValueError(f"c must lie in [0, 1), got {c}")
    return c


def consistency_a1(c: float) -> float:
    """Optimal a for the consistency program: interior tangency below c = 1/2, else (1-c)/2."""
    c = _check_c(c)
    if c < 0.5:
        return (2.0 + c - math.sqrt(3.0 + 2.0 * c)) / 2.0
    return (1.0 - c) / 2.0


def consistency_lambda1(c: float) -> float:
    """lambda_1 from u_1(a_1) = 0: delta_1 = ((1-2a-c)/(1+c) + sqrt(a)) / sqrt(1-a)."""
    c = _check_c(c)
    a = consistency_a1(c)
    delta = ((1.0 - 2.0 * a - c) / (1.0 + c) + math.sqrt(a)) / math.sqrt(1.0 - a)
    return 1.0 / math.sqrt(1.0 + delta * delta)


def consistency_branches(c: float) -> tuple[float, float]:
    """Both branch formulas of the consistency bound evaluated at ``c``."""
    s = math.sqrt(2.0 * c + 3.0)
    low = math.sqrt(4.0 * s * c + 6.0 * s - 10.0 * c - 8.0) / (c + 1.0)
    high = math.sqrt(2.0 / (c + 1.0))
    return low, high


def consistency_bound(c: float) -> float:
    """Consistency of CMP(c) in L_2(R^d) (prediction equals the optimum)."""
    c = _check_c(c)
    low, high = consistency_branches(c)
    return low if c < 0.5 else high


def robustness_a2(c: float) -> float:
    c = _check_c(c)
    return (2.0 - c - math.sqrt(3.0 - 2.0 * c)) / 2.0


def robustness_lambda2(c: float) -> float:
    """lambda_2 from u_2(a_2) = 0: delta_2 = ((1-2a+c)/(1-c) + sqrt(a)) / sqrt(1-a)."""
    c = _check_c(c)
    a = robustness_a2(c)
    delta = ((1.0 - 2.0 * a + c) / (1.0 - c) + math.sqrt(a)) / math.sqrt(1.0 - a)
    return 1.0 / math.sqrt(1.0 + delta * delta)


def robustness_bound(c: float) -> float:
    """Robustness of CMP(c) in L_2(R^d) (arbitrary prediction)."""
    c = _check_c(c)
    s = math.sqrt(3.0 - 2.0 * c)
    return math.sqrt(-4.0 * s * c + 6.0 * s + 10.0 * c - 8.0) / (1.0 - c)


def r_a(c: float) -> float:
    """Consistency in R^d over the R^2 consistency sqrt(2c^2+2)/(c+1)."""
    c = _check_c(c)
    if c < 0.5:
        s = math.sqrt(2.0 * c + 3.0)
        return math.sqrt(2.0 * s * c + 3.0 * s - 5.0 * c - 4.0) / math.sqrt(c * c + 1.0)
    return math.sqrt(c + 1.0) / math.sqrt(c * c + 1.0)


def r_b(c: float) -> float:
    """Robustness in R^d over the R^2 robustness sqrt(2c^2+2)/(1-c)."""
    c = _check_c(c)
    s = math.sqrt(3.0 - 2.0 * c)
    return math.sqrt(-2.0 * s * c + 3.0 * s + 5.0 * c - 4.0) / math.sqrt(c * c + 1.0)


@dataclass(frozen=True)
class PredictionBounds:
    c: float
    a1: float
    lambda1: float
    consistency: float
    a2: float
    lambda2: float
    robustness: float
    r_a: float
    r_b: float


def prediction_bounds(c: float) -> PredictionBounds:
    c = _check_c(c)
    return PredictionBounds(
        c=c,
        a1=consistency_a1(c),
        lambda1=consistency_lambda1(c),
        consistency=consistency_bound(c),
        a2=robustness_a2(c),
        lambda2=robustness_lambda2(c),
        robustness=robustness_bound(c),
        r_a=r_a(c),
        r_b=r_b(c),
    )


class CurveRow(NamedTuple):
    c: float
    consistency: float
    robustness: float
    r_a: float
    r_b: float
    identity_residual: float


def comparison_curves(c_grid: Iterable[float]) -> list[CurveRow]:
    """r_a and r_b on a grid of c, each checked against bound / (R^2 bound).

    ``identity_residual`` is the larger of |r_a - consistency/(sqrt(2c^2+2)/(c+1))|
    and |r_b - robustness/(sqrt(2c^2+2)/(1-c))|.
    """
    rows = []
    for c in c_grid:
        c = _check_c(c)
        cons = consistency_bound(c)
        rob = robustness_bound(c)
        ra, rb = r_a(c), r_b(c)
        base = math.sqrt(2.0 * c * c + 2.0)
        resid = max(abs(ra - cons / (base / (c + 1.0))), abs(rb - rob / (base / (1.0 - c))))
        rows.append(CurveRow(c, cons, rob, ra, rb, resid))
    return rows
