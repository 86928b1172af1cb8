"""Instance generators (worst-case families and random clouds) and JSON persistence.

Worst-case family for finite q > 1 in dimension d, with k = floor(a_star*d):

* Type I (fraction 1/(2 - 2*a_star)): k coordinates equal to 1/(1 - c_star), rest 0.
* Type II (fraction (1 - 2*a_star)/(2 - 2*a_star)): the all-ones point.

Each coordinate is positive for at most half of the mass, so the coordinate
median is the origin, while the all-ones point is optimal.

Max-norm family: Type I points have a single coordinate equal to 2, Type II
points are all-ones.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from medianlab.bounds import lb_params
from medianlab.mechanisms import Instance, TieBreak, coordinate_median
from medianlab.norms import NormOrder, as_order

SCHEMA_VERSION = "1"
EXTENSION = ".inst.json"


class InstanceFormatError(ValueError):
    """Malformed or incompatible instance file."""


class GenKind(enum.Enum):
    LB_GENERAL = "lb"
    LB_LINF = "linf"
    RANDOM = "random"


class Distribution(enum.Enum):
    UNIFORM_CUBE = "uniform"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class GeneratorSpec:
    kind: GenKind
    q: NormOrder
    d: int
    n: int
    seed: int = 0
    distribution: Distribution = Distribution.UNIFORM_CUBE

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", as_order(self.q))
        if self.d < 1 or self.n < 1:
            raise ValueError(f"need d >= 1 and n >= 1, got d={self.d}, n={self.n}")
        if self.kind is GenKind.LB_GENERAL:
            if self.q.is_one or self.q.is_inf:
                raise ValueError("the general lower-bound family needs a finite q > 1")
            k = math.floor(lb_params(self.q).a_star * self.d)
            if k < 1:
                raise ValueError(f"d={self.d} too small for q={self.q}: floor(a_star*d) = 0")


def generate(spec: GeneratorSpec) -> Instance:
    """Dispatch on ``spec.kind``."""
    if spec.kind is GenKind.LB_GENERAL:
        return gen_lb_instance(spec.q, spec.d, spec.n, spec.seed)
    if spec.kind is GenKind.LB_LINF:
        return gen_linf_instance(spec.d, spec.n, spec.seed)
    return gen_random_instance(spec)


def _check_origin_median(inst: Instance, what: str) -> None:
    med = coordinate_median(inst, TieBreak.LOWER)
    if np.any(med != 0.0):
        bad = int(np.flatnonzero(med != 0.0)[0])
        raise ValueError(f"{what}: coordinate median is not the origin (coordinate {bad} = {med[bad]})")


def _spread_blocks(count: int, k: int, d: int, perm: np.ndarray) -> np.ndarray:
    """Boolean (count, d) mask; row i covers positions (i*k + t) mod d, t < k.

    Consecutive blocks wrap around the coordinates, so every coordinate is
    covered floor(count*k/d) or ceil(count*k/d) times.
    """
    mask = np.zeros((count, d), dtype=bool)
    cols = (np.arange(count)[:, None] * k + np.arange(k)[None, :]) % d
    mask[np.arange(count)[:, None], perm[cols]] = True
    return mask


def gen_lb_instance(q: Any, d: int, n: int, seed: int = 0) -> Instance:
    """Two-type worst-case instance with ``n`` unweighted points.

    Raises:
        ValueError: if floor(a_star*d) = 0, a type count rounds to zero, or the
            rounded counts push some coordinate's positive count above n/2
            (the median would leave the origin).
    """
    q = as_order(q)
    if q.is_one or q.is_inf:
        raise ValueError("the general lower-bound family needs a finite q > 1")
    d, n = int(d), int(n)
    par = lb_params(q)
    k = math.floor(par.a_star * d)
    if k < 1:
        raise ValueError(f"dimension too small for the construction: floor(a_star*d) = floor({par.a_star * d:.4g}) = 0")
    exact1 = n * par.frac_type1
    n1 = int(round(exact1))
    n2 = n - n1
    if n1 < 1 or n2 < 1:
        raise ValueError(f"n={n} too small: type counts round to ({n1}, {n2})")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(d)
    pts = np.zeros((n, d))
    pts[:n1][_spread_blocks(n1, k, d, perm)] = par.type1_coord
    pts[n1:] = 1.0
    meta = {
        "generator": "lb_general",
        "q": str(q),
        "d": d,
        "n": n,
        "seed": int(seed),
        "k": k,
        "a_star": par.a_star,
        "c_star": par.c_star,
        "type1_count": n1,
        "type2_count": n2,
        "type1_rounding": n1 - exact1,
        "optimum_hint": "ones",
        "tie_break": TieBreak.LOWER.value,
    }
    inst = Instance(pts, None, meta)
    _check_origin_median(inst, "lower-bound instance")
    return inst


def gen_lb_instance_weighted(q: Any, d: int) -> Instance:
    """Exact-mass version of the worst-case family, free of integer rounding.

    d cyclic Type I points (coordinates i..i+k-1 mod d) share mass 1/(2-2*a_star)
    equally, and one all-ones point carries mass (1-2*a_star)/(2-2*a_star).
    """
    q = as_order(q)
    par = lb_params(q)
    d = int(d)
    k = math.floor(par.a_star * d)
    if k < 1:
        raise ValueError(f"dimension too small for the construction: floor(a_star*d) = floor({par.a_star * d:.4g}) = 0")
    pts = np.zeros((d + 1, d))
    pts[:d][_cyclic(d, k)] = par.type1_coord
    pts[d] = 1.0
    w = np.r_[np.full(d, par.frac_type1 / d), par.frac_type2]
    meta = {"generator": "lb_general_weighted", "q": str(q), "d": d, "k": k, "c_star": par.c_star, "optimum_hint": "ones"}
    inst = Instance(pts, w, meta)
    _check_origin_median(inst, "weighted lower-bound instance")
    return inst


def _cyclic(d: int, k: int) -> np.ndarray:
    mask = np.zeros((d, d), dtype=bool)
    cols = (np.arange(d)[:, None] + np.arange(k)[None, :]) % d
    mask[np.arange(d)[:, None], cols] = True
    return mask


def gen_linf_instance(d: int, n: int = 0, seed: int = 0, counts: str = "standard") -> Instance:
    """Max-norm worst-case family.

    ``counts="standard"`` uses the type fractions d/(2d-1) and (d-1)/(2d-1);
    ``n`` is rounded up to a multiple of 2d-1 (at least one block). With these
    fractions every coordinate is positive for more than half of the points,
    so the coordinate median is the all-ones point rather than the origin.

    ``counts="balanced"`` (d >= 2) uses fractions d/(2d-2) and (d-2)/(2d-2),
    the largest Type II share that keeps the median at the origin; ``n`` is
    rounded up to a multiple of 2d-2.

    Coordinates of Type I points cycle through [d] after a seeded
    permutation, so each coordinate gets the same number of 2's.
    """
    d, n = int(d), int(n)
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if counts == "standard":
        block, per1, per2 = 2 * d - 1, d, d - 1
    elif counts == "balanced":
        if d < 2:
            raise ValueError("balanced max-norm counts need d >= 2")
        block, per1, per2 = 2 * d - 2, d, d - 2
    else:
        raise ValueError(f"unknown counts rule {counts!r}")
    m = max(1, -(-n // block))
    n1, n2 = m * per1, m * per2
    rng = np.random.default_rng(seed)
    perm = rng.permutation(d)
    pts = np.zeros((n1 + n2, d))
    pts[np.arange(n1), perm[np.arange(n1) % d]] = 2.0
    pts[n1:] = 1.0
    meta = {
        "generator": "lb_linf",
        "counts": counts,
        "d": d,
        "n_requested": n,
        "n": n1 + n2,
        "seed": int(seed),
        "type1_count": n1,
        "type2_count": n2,
        "optimum_hint": "ones",
        "tie_break": TieBreak.LOWER.value,
    }
    return Instance(pts, None, meta)


def gen_random_instance(spec: GeneratorSpec) -> Instance:
    rng = np.random.default_rng(spec.seed)
    if spec.distribution is Distribution.GAUSSIAN:
        pts = rng.standard_normal((spec.n, spec.d))
    else:
        pts = rng.random((spec.n, spec.d))
    meta = {"generator": "random", "distribution": spec.distribution.value, "d": spec.d, "n": spec.n, "seed": int(spec.seed)}
    return Instance(pts, None, meta)


# ---------------------------------------------------------------------------
# persistence


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def instance_to_dict(inst: Instance, hex_floats: bool = False) -> dict:
    enc = float.hex if hex_floats else float
    doc = {
        "version": SCHEMA_VERSION,
        "d": inst.d,
        "n": inst.n,
        "encoding": "hex" if hex_floats else "decimal",
        "points": [[enc(float(v)) for v in row] for row in inst.points],
    }
    if inst.weights is not None:
        doc["weights"] = [enc(float(v)) for v in inst.weights]
    doc["meta"] = _jsonable(inst.meta)
    return doc


def _decode(v: Any) -> float:
    if isinstance(v, str):
        # float.hex always writes a 0x prefix; fromhex alone would accept "a"
        if "0x" not in v.lower():
            raise InstanceFormatError(f"bad hex float {v!r}")
        try:
            return float.fromhex(v)
        except ValueError as exc:
            raise InstanceFormatError(f"bad hex float {v!r}") from exc
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InstanceFormatError(f"coordinate must be a number, got {v!r}")
    return float(v)


def instance_from_dict(doc: Any) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    if "version" not in doc:
        raise InstanceFormatError("missing version field")
    if str(doc["version"]) != SCHEMA_VERSION:
        raise InstanceFormatError(f"unsupported instance version {doc['version']!r} (expected {SCHEMA_VERSION!r})")
    rows = doc.get("points")
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InstanceFormatError("points must be a non-empty list of coordinate lists")
    d = doc.get("d", len(rows[0]))
    n = doc.get("n", len(rows))
    if any(len(r) != d for r in rows):
        raise InstanceFormatError(f"dimension inconsistency: expected every point to have d={d} coordinates")
    if len(rows) != n:
        raise InstanceFormatError(f"dimension inconsistency: header says n={n}, file has {len(rows)} points")
    pts = np.array([[_decode(v) for v in r] for r in rows], dtype=np.float64)
    w = doc.get("weights")
    if w is not None:
        if not isinstance(w, list) or len(w) != n:
            raise InstanceFormatError("weights must be a list with one entry per point")
        w = np.array([_decode(v) for v in w], dtype=np.float64)
    try:
        return Instance(pts, w, doc.get("meta") or {})
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from exc


def save_instance(inst: Instance, path: str | Path, hex_floats: bool = False) -> Path:
    """Write ``inst`` as JSON. Decimal output uses the shortest repr that round-trips."""
    path = Path(path)
    text = json.dumps(instance_to_dict(inst, hex_floats), indent=1)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def load_instance(path: str | Path) -> Instance:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: not valid JSON ({exc})") from exc
    return instance_from_dict(doc)
