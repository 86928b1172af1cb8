"""Command-line interface.

Exit codes: 0 success, 1 a verification check failed, 2 usage or input
error, 3 I/O error. ``inf`` spells q = infinity. The default seed comes from
``MEDIANLAB_SEED`` when set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from medianlab import bounds as bd
from medianlab._backend import BACKEND
from medianlab.instances import (
    Distribution,
    GeneratorSpec,
    GenKind,
    InstanceFormatError,
    gen_lb_instance,
    gen_linf_instance,
    gen_random_instance,
    load_instance,
    save_instance,
)
from medianlab.mechanisms import TieBreak, cmp_mechanism, median_mechanism
from medianlab.norms import NormOrder
from medianlab.optfac import SolverConfig, empirical_ratio
from medianlab import verify as vf

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _fmt(x: Any) -> str:
    """Machine format: shortest round-trip repr for floats (17 significant digits at most)."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _human(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.6g}"
    return str(x)


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _q_arg(text: str) -> NormOrder:
    try:
        return NormOrder.parse(text)
    except (ValueError, TypeError):
        raise argparse.ArgumentTypeError(f"invalid q {text!r}: need a number >= 1 or 'inf'")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _default_seed() -> int:
    raw = os.environ.get("MEDIANLAB_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        print(f"warning: ignoring non-integer MEDIANLAB_SEED={raw!r}, using 0", file=sys.stderr)
        return 0


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8", newline="\n")


def _table(rows: Sequence[Sequence[Any]], header: Sequence[str]) -> str:
    cells = [list(header)] + [[_human(v) for v in r] for r in rows]
    widths = [max(len(c[i]) for c in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_bounds(args: argparse.Namespace) -> int:
    sol = bd.ub(args.q)
    if args.json:
        print(json.dumps(_jsonable(sol.as_dict()), indent=2))
        return EXIT_OK
    for k, v in sol.as_dict().items():
        print(f"{k:>16}: {_fmt(v) if isinstance(v, float) else v}")
    return EXIT_OK


def ub_curve_rows(q_min: float, q_max: float, steps: int) -> list[tuple]:
    if not (1.0 <= q_min < q_max) or steps < 2:
        raise UsageError("need 1 <= q-min < q-max and steps >= 2")
    rows = []
    for q in np.linspace(q_min, q_max, steps):
        s = bd.ub(float(q))
        rows.append((float(q), s.a_star, s.lambda_star, s.ub))
    return rows


def prediction_curve_rows(c_steps: int) -> list[tuple]:
    if c_steps < 2:
        raise UsageError("c-steps must be >= 2")
    grid = [i / c_steps for i in range(c_steps)]
    return [(r.c, r.consistency, r.robustness, r.r_a, r.r_b) for r in bd.comparison_curves(grid)]


def cmd_curve(args: argparse.Namespace) -> int:
    if args.curve == "ub":
        text = _csv_text(["q", "a_star", "lambda_star", "ub"], ub_curve_rows(args.q_min, args.q_max, args.steps))
    else:
        text = _csv_text(["c", "consistency", "robustness", "r_a", "r_b"], prediction_curve_rows(args.c_steps))
    _emit(text, args.output)
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    if args.family == "lb":
        inst = gen_lb_instance(args.q, args.d, args.n, args.seed)
    elif args.family == "linf":
        inst = gen_linf_instance(args.d, args.n, args.seed, counts=args.counts)
    else:
        spec = GeneratorSpec(GenKind.RANDOM, 2, args.d, args.n, args.seed, Distribution(args.dist))
        inst = gen_random_instance(spec)
    path = save_instance(inst, args.output, hex_floats=args.hex)
    print(f"wrote {path} (n={inst.n}, d={inst.d})")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance)
    q = args.q
    cfg = SolverConfig(seed=args.seed)
    tb = TieBreak.parse(args.tie_break)
    extra: dict = {}
    if args.prediction is not None or args.c is not None:
        if args.prediction is None or args.c is None:
            raise UsageError("--prediction and --c must be given together")
        pred = np.array(args.prediction, dtype=np.float64)
        if pred.shape[0] != inst.d:
            raise UsageError(f"prediction has {pred.shape[0]} coordinates, instance has d={inst.d}")
        if not 0.0 <= args.c < 1.0:
            raise UsageError("--c must lie in [0, 1)")
        mech = cmp_mechanism(args.c, pred, tb)
        if q.q == 2.0:
            pb = bd.prediction_bounds(args.c)
            extra = {"consistency_bound": pb.consistency, "robustness_bound": pb.robustness}
            report = empirical_ratio(inst, q, cfg, tb, mechanism=mech, theoretical_ub=pb.robustness)
        else:
            print("warning: consistency/robustness bounds are only available for q=2", file=sys.stderr)
            report = empirical_ratio(inst, q, cfg, tb, mechanism=mech, theoretical_ub=math.nan)
    else:
        report = empirical_ratio(inst, q, cfg, tb)
    doc = report.as_dict()
    doc.update(extra)
    if args.json:
        print(json.dumps(_jsonable(doc), indent=2))
    else:
        for k in ("q", "mechanism", "tie_break", "sc_mechanism", "sc_optimal", "empirical_ratio", "theoretical_ub", "certified"):
            print(f"{k:>20}: {_human(doc[k])}")
        for k, v in extra.items():
            print(f"{k:>20}: {_human(v)}")
        if inst.d <= 10:
            print(f"{'mechanism_point':>20}: {[_human(v) for v in doc['mechanism_point']]}")
            print(f"{'optimal_point':>20}: {[_human(v) for v in doc['optimal_point']]}")
    return EXIT_OK


def _verify_cert(args: argparse.Namespace) -> int:
    q = args.q
    sol = bd.ub(q)
    lam = args.lam if args.lam is not None else sol.lambda_star
    rep = vf.certificate_check(q, lam, args.grid)
    tight = args.lam is None
    ok = rep.passed and (not tight or (abs(rep.min_u) <= 1e-8 and abs(rep.argmin_a - sol.a_star) <= 1e-5))
    print(_table([(str(q), rep.lam, rep.min_u, rep.argmin_a, rep.z, "pass" if rep.passed else "FAIL")], ["q", "lambda", "min_u", "argmin_a", "z", "certificate"]), end="")
    if tight:
        print(f"tangency at lambda_star: |min u| = {abs(rep.min_u):.3g}, |argmin - a_star| = {abs(rep.argmin_a - sol.a_star):.3g}")
    return EXIT_OK if ok else EXIT_CHECK


def _verify_sp(args: argparse.Namespace) -> int:
    if args.mech == "median":
        mech = median_mechanism()
    elif args.mech == "cmp":
        mech = cmp_mechanism(args.c, lambda d: np.full(d, 0.5))
    else:
        mech = vf.mean_mechanism()
    res = vf.strategyproofness_suite(mech, args.trials, args.seed, q=args.q)
    print(f"mechanism={getattr(mech, '__name__', args.mech)} q={args.q} trials={res.trials} violations={res.violations} worst_delta={res.worst_delta:.3g}")
    if args.mech == "mean":  # self-test: the harness must catch the manipulable mechanism
        return EXIT_OK if res.violations > 0 else EXIT_CHECK
    return EXIT_OK if res.violations == 0 else EXIT_CHECK


def sweep_csv(sw: vf.SweepResult) -> str:
    return _csv_text(
        ["d", "predicted_lb", "empirical_lb", "ub"],
        [(r.d, r.predicted_lb, "" if r.empirical_lb is None else r.empirical_lb, r.ub) for r in sw.rows],
    )


def _verify_lb(args: argparse.Namespace) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        sw = vf.lb_sweep(args.q, args.dims, n=args.n, seed=args.seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    rows = [(r.d, r.predicted_lb, r.empirical_lb if r.empirical_lb is not None else "-", r.ub, r.gap) for r in sw.rows]
    print(_table(rows, ["d", "predicted_lb", "empirical_lb", "ub", "gap"]), end="")
    print(f"fitted C in gap ~ C/d: {sw.fitted_c:.6g}")
    for k, v in sw.checks.items():
        print(f"  {k}: {'pass' if v else 'FAIL'}")
    if args.output:
        _emit(sweep_csv(sw), args.output)
    return EXIT_OK if sw.passed else EXIT_CHECK


def _verify_search(args: argparse.Namespace) -> int:
    res = vf.adversarial_search(args.q, args.d, args.n, args.restarts, args.seed, validate=args.validate)
    bound = bd.ub(args.q).ub
    print(f"q={res.q} d={res.d} n={res.n} restarts={res.restarts_used}")
    print(f"best_ratio={_fmt(res.best_ratio)} (structured surrogate {_fmt(res.surrogate_ratio)}), ub={_fmt(bound)}")
    print(f"support-size histogram: {res.sizes}")
    if res.validation_ratio is not None:
        print(f"unstructured validation ratio: {_fmt(res.validation_ratio)}")
    if args.output:
        doc = {
            "q": str(res.q),
            "d": res.d,
            "n": res.n,
            "restarts": res.restarts_used,
            "best_ratio": res.best_ratio,
            "surrogate_ratio": res.surrogate_ratio,
            "sizes": res.sizes,
            "validation_ratio": res.validation_ratio,
            "points": res.best_instance.points,
        }
        _emit(json.dumps(_jsonable(doc)) + "\n", args.output)
    return EXIT_OK if res.best_ratio <= bound + 1e-6 else EXIT_CHECK


def cmd_verify(args: argparse.Namespace) -> int:
    return {"cert": _verify_cert, "sp": _verify_sp, "lb": _verify_lb, "search": _verify_search}[args.check](args)


# ---------------------------------------------------------------------------
# report

REPORT_QS = ["1", "1.1", "1.25", "1.5", "2", "3", "5", "10", "50", "1000", "inf"]
CERT_QS = [1.5, 2.0, 3.0, 5.0, 10.0]


def build_report(outdir: Path, seed: int, perturb_lambda: float = 0.0, sp_trials: int = 2000) -> tuple[dict, str]:
    """Run every embedded check, write CSVs into ``outdir`` and return (checks, markdown)."""
    outdir.mkdir(parents=True, exist_ok=True)
    checks: dict[str, bool] = {}
    md = ["# medianlab report", "", f"seed: {seed}", ""]

    sols = [bd.ub(q) for q in REPORT_QS]
    (outdir / "bounds.csv").write_text(
        _csv_text(
            ["q", "a_star", "delta_star", "lambda_star", "ub", "residual_u", "residual_uprime"],
            [(str(s.q), s.a_star, s.delta_star, s.lambda_star, s.ub, s.residual_u, s.residual_uprime) for s in sols],
        ),
        newline="\n",
    )
    ubs = [s.ub for s in sols]
    checks["ub(2) equals sqrt(6 sqrt3 - 8)"] = abs(bd.ub(2).ub - math.sqrt(6 * math.sqrt(3) - 8)) <= 1e-9
    checks["ub(1) = 1 and ub(inf) = 3"] = bd.ub(1).ub == 1.0 and bd.ub("inf").ub == 3.0
    checks["ub nondecreasing in q"] = all(b >= a - 1e-12 for a, b in zip(ubs, ubs[1:]))
    checks["tangency residuals <= 1e-9"] = all(
        s.special_case or (abs(s.residual_u) <= 1e-9 and abs(s.residual_uprime) <= 1e-9) for s in sols
    )
    md += ["## Upper bounds", "", _md_table(["q", "a_star", "lambda_star", "ub"], [(str(s.q), s.a_star, s.lambda_star, s.ub) for s in sols]), ""]

    (outdir / "ub_curve.csv").write_text(_csv_text(["q", "a_star", "lambda_star", "ub"], ub_curve_rows(1.0, 20.0, 100)), newline="\n")
    pred_rows = prediction_curve_rows(1000)
    (outdir / "prediction_curve.csv").write_text(_csv_text(["c", "consistency", "robustness", "r_a", "r_b"], pred_rows), newline="\n")
    curves = bd.comparison_curves([r[0] for r in pred_rows])
    ra_max = max(r.r_a for r in curves)
    checks["max r_a < 1.11"] = ra_max < 1.11
    checks["r_b strictly decreasing"] = all(b.r_b < a.r_b for a, b in zip(curves, curves[1:]))
    checks["r_a / r_b identities <= 1e-9"] = max(r.identity_residual for r in curves) <= 1e-9
    md += ["## Prediction-augmented median (q = 2)", "", f"max r_a over the grid: {ra_max:.6f}", ""]

    cert_rows = []
    cert_ok = True
    for q in CERT_QS:
        s = bd.ub(q)
        lam = s.lambda_star * (1.0 + perturb_lambda)
        at = vf.certificate_check(q, min(lam, 1.0 - 1e-15))
        above = vf.certificate_check(q, min(1.01 * lam, 1.0 - 1e-15))
        tight = at.passed and abs(at.min_u) <= 1e-8 and abs(at.argmin_a - s.a_star) <= 1e-5 and not above.passed
        cert_ok &= tight
        cert_rows.append((q, lam, at.min_u, at.argmin_a, "pass" if tight else "FAIL"))
    checks["certificate tangency at lambda_star"] = cert_ok
    (outdir / "certificates.csv").write_text(_csv_text(["q", "lambda", "min_u", "argmin_a", "status"], cert_rows), newline="\n")
    md += ["## Relaxation certificates", "", _md_table(["q", "lambda", "min u", "argmin a", "status"], cert_rows), ""]

    for q, dims in (("2", [8, 16, 64, 256, 1024, 10**6]), ("inf", [2, 10, 100])):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            sw = vf.lb_sweep(q, dims, seed=seed)
        tag = "q2" if q == "2" else "qinf"
        (outdir / f"lb_sweep_{tag}.csv").write_text(sweep_csv(sw), newline="\n")
        for k, v in sw.checks.items():
            checks[f"lb sweep q={q}: {k}"] = v
        md += [
            f"## Lower-bound sweep, q = {q}",
            "",
            _md_table(["d", "predicted", "built", "UB"], [(r.d, r.predicted_lb, r.empirical_lb if r.empirical_lb is not None else "-", r.ub) for r in sw.rows]),
            "",
            f"fitted C in gap ~ C/d: {sw.fitted_c:.6g}",
            "",
        ]

    sp_rows = []
    for name, mech, q in [
        ("median", median_mechanism(), "1"),
        ("median", median_mechanism(), "2"),
        ("median", median_mechanism(), "inf"),
        ("cmp c=0.25", cmp_mechanism(0.25, lambda d: np.full(d, 0.5)), "2"),
        ("cmp c=0.5", cmp_mechanism(0.5, lambda d: np.full(d, 0.5)), "2"),
        ("cmp c=0.75", cmp_mechanism(0.75, lambda d: np.full(d, 0.5)), "2"),
    ]:
        res = vf.strategyproofness_suite(mech, sp_trials, seed, q=q)
        sp_rows.append((name, q, res.trials, res.violations))
        checks[f"strategy-proof: {name}, q={q}"] = res.violations == 0
    res = vf.strategyproofness_suite(vf.mean_mechanism(), sp_trials, seed, q=2)
    sp_rows.append(("mean (self-test)", "2", res.trials, res.violations))
    checks["harness catches the mean mechanism"] = res.violations > 0
    md += ["## Strategy-proofness", "", _md_table(["mechanism", "q", "trials", "violations"], sp_rows), ""]

    md += ["## Checks", ""] + [f"- [{'x' if v else ' '}] {k}" for k, v in checks.items()]
    md.append("")
    text = "\n".join(md)
    (outdir / "summary.md").write_text(text, newline="\n")
    return checks, text


def _md_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(_human(v) for v in r) + " |" for r in rows]
    return "\n".join(lines)


def cmd_report(args: argparse.Namespace) -> int:
    checks, _ = build_report(Path(args.output), args.seed, args.perturb_lambda, args.sp_trials)
    failed = [k for k, v in checks.items() if not v]
    print(f"wrote report to {args.output} ({len(checks) - len(failed)}/{len(checks)} checks passed)")
    for k in failed:
        print(f"  FAIL: {k}")
    return EXIT_OK if not failed else EXIT_CHECK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="medianlab", description="Coordinate-wise median mechanisms in L_q(R^d).")
    p.add_argument("--version", action="version", version=f"medianlab 0.1.0 ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bounds", help="solve for ub(q)")
    b.add_argument("--q", type=_q_arg, required=True)
    b.add_argument("--json", action="store_true")
    b.set_defaults(func=cmd_bounds)

    c = sub.add_parser("curve", help="CSV data for ub(q) or the prediction trade-off")
    csub = c.add_subparsers(dest="curve", required=True)
    cu = csub.add_parser("ub")
    cu.add_argument("--q-min", type=float, default=1.0)
    cu.add_argument("--q-max", type=float, default=20.0)
    cu.add_argument("--steps", type=int, default=100)
    cu.add_argument("-o", "--output")
    cp = csub.add_parser("prediction")
    cp.add_argument("--c-steps", type=int, default=200)
    cp.add_argument("-o", "--output")
    c.set_defaults(func=cmd_curve)

    g = sub.add_parser("gen", help="generate an instance file")
    gsub = g.add_subparsers(dest="family", required=True)
    gl = gsub.add_parser("lb")
    gl.add_argument("--q", type=_q_arg, required=True)
    gl.add_argument("--d", type=int, required=True)
    gl.add_argument("--n", type=int, default=10_000)
    gi = gsub.add_parser("linf")
    gi.add_argument("--d", type=int, required=True)
    gi.add_argument("--n", type=int, default=0)
    gi.add_argument("--counts", choices=["standard", "balanced"], default="standard")
    gr = gsub.add_parser("random")
    gr.add_argument("--d", type=int, required=True)
    gr.add_argument("--n", type=int, required=True)
    gr.add_argument("--dist", choices=[x.value for x in Distribution], default="uniform")
    for sp in (gl, gi, gr):
        sp.add_argument("--seed", type=int, default=_default_seed())
        sp.add_argument("-o", "--output", required=True)
        sp.add_argument("--hex", action="store_true", help="hex-float coordinates")
    g.set_defaults(func=cmd_gen)

    e = sub.add_parser("eval", help="evaluate the median (or CMP) on an instance")
    e.add_argument("--instance", required=True)
    e.add_argument("--q", type=_q_arg, required=True)
    e.add_argument("--prediction", type=_float_list)
    e.add_argument("--c", type=float)
    e.add_argument("--tie-break", choices=["lower", "upper"], default="lower")
    e.add_argument("--seed", type=int, default=_default_seed())
    e.add_argument("--json", action="store_true")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="certificates and stress tests")
    vsub = v.add_subparsers(dest="check", required=True)
    vc = vsub.add_parser("cert")
    vc.add_argument("--q", type=_q_arg, required=True)
    vc.add_argument("--lam", type=float)
    vc.add_argument("--grid", type=int, default=10_000)
    vs = vsub.add_parser("sp")
    vs.add_argument("--trials", type=int, default=10_000)
    vs.add_argument("--mech", choices=["median", "cmp", "mean"], default="median")
    vs.add_argument("--c", type=float, default=0.5)
    vs.add_argument("--q", type=_q_arg, default=NormOrder(2.0))
    vb = vsub.add_parser("lb")
    vb.add_argument("--q", type=_q_arg, required=True)
    vb.add_argument("--dims", type=_int_list, required=True)
    vb.add_argument("--n", type=int, default=2000)
    vb.add_argument("-o", "--output")
    vr = vsub.add_parser("search")
    vr.add_argument("--q", type=_q_arg, required=True)
    vr.add_argument("--d", type=int, required=True)
    vr.add_argument("--n", type=int, required=True)
    vr.add_argument("--restarts", type=int, default=20)
    vr.add_argument("--validate", action="store_true")
    vr.add_argument("-o", "--output")
    for sp in (vc, vs, vb, vr):
        sp.add_argument("--seed", type=int, default=_default_seed())
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="run every check and write a markdown + CSV report")
    r.add_argument("-o", "--output", required=True)
    r.add_argument("--seed", type=int, default=_default_seed())
    r.add_argument("--sp-trials", type=int, default=2000)
    r.add_argument("--perturb-lambda", type=float, default=0.0, help="relative perturbation of lambda_star (self-test)")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InstanceFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
