"""Compare the compiled kernels against the pure-Python fallback.

Usage:
    python3 benchmarks/bench_kernels.py [--n 2000] [--d 50] [--repeat 5]

Each row reports the best-of-``repeat`` wall time per call for both
implementations and the speedup; results are also checked for agreement.
"""

from __future__ import annotations

import argparse
import importlib
import timeit

import numpy as np

from medianlab import _pykernels

try:
    _ckernels = importlib.import_module("medianlab._ckernels")
except ImportError:
    _ckernels = None


def _cases(n: int, d: int, seed: int):
    rng = np.random.default_rng(seed)
    pts = np.ascontiguousarray(rng.normal(size=(n, d)))
    w = np.ascontiguousarray(rng.uniform(0.5, 2.0, size=n))
    f = np.ascontiguousarray(rng.normal(size=d))
    small = np.ascontiguousarray(pts[:8, :2])
    lo = np.array([-3.0, -3.0])
    counts = np.array([301, 301], dtype=np.int64)
    return {
        "social_cost q=2": lambda k: k.social_cost(pts, w, f, 2.0),
        "social_cost q=3.5": lambda k: k.social_cost(pts, w, f, 3.5),
        "social_cost q=inf": lambda k: k.social_cost(pts, w, f, np.inf),
        "smoothed_cost_grad q=1.5": lambda k: k.smoothed_cost_grad(pts, w, f, 1.5, 1e-9),
        "weighted_median": lambda k: k.weighted_median(pts, w, False),
        "grid_min 301x301": lambda k: k.grid_min(small, w[:8].copy(), lo, 0.02, counts, 2.0),
        # the iteration count may differ by one at the exact-zero step, so compare the point only
        "weiszfeld 200 it": lambda k: k.weiszfeld(pts, w, f.copy(), 1e-12, 200, 0.0)[0],
    }


def _agree(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_agree(x, y) for x, y in zip(a, b))
    return bool(np.allclose(a, b, rtol=1e-9, atol=1e-12))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--d", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"n={args.n} d={args.d} repeat={args.repeat}")
    print(f"{'kernel':<26}{'python [ms]':>12}{'cython [ms]':>13}{'speedup':>9}  agree")
    for name, call in _cases(args.n, args.d, args.seed).items():
        times = {}
        for label, mod in (("python", _pykernels), ("cython", _ckernels)):
            timer = timeit.Timer(lambda: call(mod))
            loops, _ = timer.autorange()
            times[label] = min(timer.repeat(args.repeat, loops)) / loops
        ok = _agree(call(_pykernels), call(_ckernels))
        print(f"{name:<26}{1e3 * times['python']:>12.3f}{1e3 * times['cython']:>13.3f}{times['python'] / times['cython']:>8.1f}x  {ok}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
