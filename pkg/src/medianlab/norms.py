"""L_q distances and social cost, including the q = infinity limit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from medianlab._backend import kernels


@dataclass(frozen=True)
class NormOrder:
    """The exponent ``q`` of an L_q norm, with ``math.inf`` standing for the max norm.

    ``qq1 = q/(q-1)`` and ``q1q = (q-1)/q`` are cached for ``1 < q < inf`` and
    are ``None`` at both ends, where every formula needs its own branch.
    """

    q: float
    qq1: float | None = field(init=False, repr=False, compare=False)
    q1q: float | None = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        q = float(self.q)
        if math.isnan(q) or q < 1.0:
            raise ValueError(f"norm order must satisfy q >= 1 or q = inf, got {self.q!r}")
        object.__setattr__(self, "q", q)
        if 1.0 < q < math.inf:
            object.__setattr__(self, "qq1", q / (q - 1.0))
            object.__setattr__(self, "q1q", (q - 1.0) / q)
        else:
            object.__setattr__(self, "qq1", None)
            object.__setattr__(self, "q1q", None)

    @classmethod
    def parse(cls, text: Any) -> NormOrder:
        """Accept a NormOrder, a number, or the strings ``"inf"``/``"infinity"``."""
        if isinstance(text, NormOrder):
            return text
        if isinstance(text, str) and text.strip().lower() in ("inf", "infinity", "+inf"):
            return cls(math.inf)
        return cls(float(text))

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.q)

    @property
    def is_one(self) -> bool:
        return self.q == 1.0

    @property
    def dual(self) -> float:
        """Exponent of the dual norm (inf for q = 1, 1 for q = inf)."""
        if self.is_one:
            return math.inf
        if self.is_inf:
            return 1.0
        return self.qq1

    def __str__(self) -> str:
        return "inf" if self.is_inf else f"{self.q:g}"


INF = NormOrder(math.inf)


def as_order(q: Any) -> NormOrder:
    return NormOrder.parse(q)


def as_point(x: Any) -> np.ndarray:
    """Validate and convert to a contiguous float64 vector with finite entries."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise ValueError(f"a point must be a non-empty vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    return arr


def lq_norm(x: Any, q: Any) -> float:
    """(sum |x_j|^q)^(1/q), or max |x_j| for q = inf."""
    return float(kernels.lq_norm(as_point(x), as_order(q).q))


def lq_dist(x: Any, y: Any, q: Any) -> float:
    x = as_point(x)
    y = as_point(y)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return float(kernels.lq_norm(x - y, as_order(q).q))


def _points_and_weights(P: Any) -> tuple[np.ndarray, np.ndarray]:
    points = getattr(P, "points", P)
    weights = getattr(P, "weights", None)
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if weights is None:
        weights = np.ones(points.shape[0])
    return points, np.ascontiguousarray(weights, dtype=np.float64)


def social_cost(P: Any, f: Any, q: Any) -> float:
    """Weighted sum of L_q distances from the facility ``f`` to every point of ``P``.

    ``P`` is an :class:`~medianlab.mechanisms.Instance` or an ``(n, d)`` array.
    """
    points, weights = _points_and_weights(P)
    f = as_point(f)
    if points.shape[1] != f.shape[0]:
        raise ValueError(f"dimension mismatch: instance has d={points.shape[1]}, facility d={f.shape[0]}")
    return float(kernels.social_cost(points, weights, f, as_order(q).q))
