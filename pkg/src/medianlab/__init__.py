"""Coordinate-wise median mechanisms for facility location in L_q(R^d).

Approximation-ratio bounds, worst-case instance generators, an optimal-facility
solver and verification harnesses.
"""

from medianlab._backend import BACKEND
from medianlab.bounds import (
    BoundSolution,
    PredictionBounds,
    c_star,
    comparison_curves,
    consistency_bound,
    lb_ratio,
    prediction_bounds,
    robustness_bound,
    ub,
)
from medianlab.mechanisms import Instance, TieBreak, cmp_median, coordinate_median
from medianlab.norms import INF, NormOrder, lq_dist, lq_norm, social_cost

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "INF",
    "BoundSolution",
    "Instance",
    "NormOrder",
    "PredictionBounds",
    "TieBreak",
    "c_star",
    "cmp_median",
    "comparison_curves",
    "consistency_bound",
    "coordinate_median",
    "lb_ratio",
    "lq_dist",
    "lq_norm",
    "prediction_bounds",
    "robustness_bound",
    "social_cost",
    "ub",
]
