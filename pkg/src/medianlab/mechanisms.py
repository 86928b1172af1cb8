"""Coordinate-wise median and the prediction-augmented generalized median CMP(c)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from medianlab._backend import kernels
from medianlab.norms import as_order, as_point, lq_dist


class TieBreak(enum.Enum):
    """Which middle order statistic to take when the weight splits evenly."""

    LOWER = "lower"
    UPPER = "upper"

    @classmethod
    def parse(cls, value: Any) -> TieBreak:
        if isinstance(value, TieBreak):
            return value
        return cls(str(value).lower())


@dataclass(frozen=True, eq=False)
class Instance:
    """n agent locations in R^d with optional positive weights and free-form metadata."""

    points: np.ndarray
    weights: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise ValueError(f"instance needs at least one point of dimension >= 1, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("instance coordinates must be finite")
        pts = np.ascontiguousarray(pts)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.weights is not None:
            w = np.array(self.weights, dtype=np.float64).reshape(-1)
            if w.shape[0] != pts.shape[0]:
                raise ValueError(f"got {w.shape[0]} weights for {pts.shape[0]} points")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise ValueError("weights must be finite and strictly positive")
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    @property
    def weight_array(self) -> np.ndarray:
        """Weights as a float64 array (all ones when unweighted)."""
        if self.weights is None:
            return np.ones(self.n)
        return self.weights

    @property
    def total_weight(self) -> float:
        return float(self.n) if self.weights is None else float(self.weights.sum())

    def with_point(self, i: int, report: Any) -> Instance:
        """Copy of the instance with point ``i`` replaced by ``report``."""
        if not 0 <= i < self.n:
            raise IndexError(f"agent index {i} out of range for n={self.n}")
        report = as_point(report)
        if report.shape[0] != self.d:
            raise ValueError(f"dimension mismatch: report has d={report.shape[0]}, instance d={self.d}")
        pts = self.points.copy()
        pts[i] = report
        return Instance(pts, self.weights, self.meta)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        if self.points.shape != other.points.shape or not np.array_equal(self.points, other.points):
            return False
        if (self.weights is None) != (other.weights is None):
            return False
        if self.weights is not None and not np.array_equal(self.weights, other.weights):
            return False
        return self.meta == other.meta

    __hash__ = None


def as_instance(P: Any) -> Instance:
    return P if isinstance(P, Instance) else Instance(P)


def coordinate_median(P: Any, tb: TieBreak | str = TieBreak.LOWER) -> np.ndarray:
    """Per-coordinate weighted median.

    With LOWER, coordinate j is the smallest value v whose cumulative weight
    ``sum{w_i : p_ij <= v}`` reaches half the total; UPPER is the mirror image.
    Each output coordinate is one of the input values in that coordinate.
    """
    P = as_instance(P)
    upper = TieBreak.parse(tb) is TieBreak.UPPER
    return kernels.weighted_median(P.points, np.ascontiguousarray(P.weight_array), upper)


def cmp_median(P: Any, prediction: Any, c: float, tb: TieBreak | str = TieBreak.LOWER) -> np.ndarray:
    """CMP(c): append the prediction with weight ``c`` times the total agent weight.

    Equivalent to adding ``c*n`` copies of the prediction when that count is
    an integer; fractional counts are handled exactly through the weight.
    """
    P = as_instance(P)
    prediction = as_point(prediction)
    if prediction.shape[0] != P.d:
        raise ValueError(f"dimension mismatch: prediction has d={prediction.shape[0]}, instance d={P.d}")
    c = float(c)
    if not 0.0 <= c < 1.0:
        raise ValueError(f"CMP confidence c must lie in [0, 1), got {c}")
    if c == 0.0:
        return coordinate_median(P, tb)
    points = np.vstack([P.points, prediction[None, :]])
    weights = np.append(P.weight_array, c * P.total_weight)
    upper = TieBreak.parse(tb) is TieBreak.UPPER
    return kernels.weighted_median(points, weights, upper)


Mechanism = Callable[[Instance], np.ndarray]


def median_mechanism(tb: TieBreak | str = TieBreak.LOWER) -> Mechanism:
    tb = TieBreak.parse(tb)

    def mech(P: Instance) -> np.ndarray:
        return coordinate_median(P, tb)

    mech.__name__ = f"median[{tb.value}]"
    return mech


def cmp_mechanism(c: float, prediction: Any, tb: TieBreak | str = TieBreak.LOWER) -> Mechanism:
    """CMP(c) with a fixed prediction.

    ``prediction`` may be a point or a callable ``d -> point`` so the same
    handle can be used on instances of varying dimension.
    """
    tb = TieBreak.parse(tb)

    def mech(P: Instance) -> np.ndarray:
        pred = prediction(P.d) if callable(prediction) else prediction
        return cmp_median(P, pred, c, tb)

    mech.__name__ = f"cmp[c={c:g},{tb.value}]"
    return mech


def deviation_cost_delta(P: Any, i: int, report: Any, mech: Mechanism, q: Any) -> float:
    """Cost change for agent ``i`` (true location ``p_i``) when it reports ``report``.

    Negative values mean the misreport pays off, i.e. a strategy-proofness violation.
    """
    P = as_instance(P)
    deviated = P.with_point(i, report)
    q = as_order(q)
    truth = P.points[i]
    return lq_dist(mech(deviated), truth, q) - lq_dist(mech(P), truth, q)
