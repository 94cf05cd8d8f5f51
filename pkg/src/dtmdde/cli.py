"""Command-line front end.

    dtmdde solve   MODEL [--out CSV] [--step S] [--order N] [--dump-coeffs JSON]
    dtmdde coeffs  MODEL [--out JSON] [--order N]
    dtmdde compare MODEL [--out CSV] [--h H] [--step S] [--tol TOL] [--order N]

Exit codes: 0 ok, 1 model/validation error, 2 numerical blow-up, 3 compare
deviation above ``--tol``.
"""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction
from typing import Optional, Sequence

from .errors import (
    DDEError,
    DivisionBySmallLeadingCoefficient,
    NonFiniteCoefficient,
    NonFiniteState,
)
from .model import classify, parse_model, validate_model
from .oracle import compare, rk_solve
from .solver import PiecewiseSolution, sample, segment_residual, solve

EXIT_MODEL = 1
EXIT_BLOWUP = 2
EXIT_TOLERANCE = 3

_BLOWUP = (NonFiniteCoefficient, NonFiniteState, DivisionBySmallLeadingCoefficient, ArithmeticError)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _open_out(path: Optional[str]):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="ascii"), True


def _write(path: Optional[str], text: str) -> None:
    fh, close = _open_out(path)
    try:
        fh.write(text)
    finally:
        if close:
            fh.close()


def _load(path: str, order: Optional[int]):
    with open(path, encoding="utf-8") as fh:
        m = parse_model(fh.read())
    if order is not None:
        m = m.with_trunc_order(order)
        m.check()
    diags = validate_model(m)
    if diags:
        raise DDEError("; ".join(str(d) for d in diags))
    return m


def _summary(sol: PiecewiseSolution) -> str:
    lines = [
        f"class: {classify(sol.model)}; schedule: {sol.schedule.mode}; "
        f"segments: {len(sol.segments)}"
    ]
    worst = 0.0
    for seg in sol.segments:
        res = segment_residual(sol, seg.index)
        worst = max(worst, res)
        a, b = seg.interval
        lines.append(f"  segment {seg.index}: ({fmt(a)}, {fmt(b)}] order {seg.order} residual {res:.3e}")
    lines.append(f"max residual: {worst:.3e}")
    lines.extend(f"warning: {w}" for w in sol.warnings)
    return "\n".join(lines) + "\n"


def _center_text(c) -> str:
    return f"{c.numerator}/{c.denominator}" if isinstance(c, Fraction) else repr(float(c))


def coefficient_dump(sol: PiecewiseSolution) -> dict:
    segs = []
    for seg in sol.segments:
        a, b = seg.interval
        segs.append(
            {
                "segment": seg.index,
                "center": float(a),
                "center_exact": _center_text(a),
                "interval": [float(a), float(b)],
                "order": seg.order,
                "seeds": list(seg.seeds),
                "coefficients": list(seg.series.coeffs),
            }
        )
    return {
        "mode": sol.schedule.mode,
        "delays": [_center_text(d) for d in sol.schedule.delays],
        "segments": segs,
    }


def _dump_json(sol: PiecewiseSolution) -> str:
    return json.dumps(coefficient_dump(sol), indent=2) + "\n"


def cmd_solve(args) -> int:
    m = _load(args.model, args.order)
    sol = solve(m)
    sys.stderr.write(_summary(sol))
    rows = sample(sol, float(m.t0), float(m.T), args.step)
    _write(args.out, "t,u\n" + "".join(f"{fmt(t)},{fmt(u)}\n" for t, u in rows))
    if args.dump_coeffs:
        _write(args.dump_coeffs, _dump_json(sol))
    return 0


def cmd_coeffs(args) -> int:
    m = _load(args.model, args.order)
    sol = solve(m)
    sys.stderr.write(_summary(sol))
    _write(args.out, _dump_json(sol))
    return 0


def cmd_compare(args) -> int:
    m = _load(args.model, args.order)
    sol = solve(m)
    sys.stderr.write(_summary(sol))
    traj = rk_solve(m, args.h)
    report = compare(sol, traj, float(m.t0), float(m.T), args.step)
    body = "".join(f"{fmt(t)},{fmt(a)},{fmt(b)},{fmt(d)}\n" for t, a, b, d in report.rows)
    _write(args.out, "t,u_dtm,u_rk,abs_diff\n" + body)
    print(f"max_abs_diff {fmt(report.max_abs_diff)} at t = {fmt(report.argmax_t)}", file=sys.stderr)
    return 0 if report.max_abs_diff <= args.tol else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dtmdde", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("model", help="model file")
        sp.add_argument("--out", default=None, help="output file (default: stdout)")
        sp.add_argument("--order", type=int, default=None, help="override the model's truncation order N")

    s = sub.add_parser("solve", help="solve and write sampled CSV")
    common(s)
    s.add_argument("--step", type=float, default=0.05)
    s.add_argument("--dump-coeffs", default=None, metavar="PATH", help="also write the coefficient dump")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("coeffs", help="write per-segment Taylor coefficients as JSON")
    common(c)
    c.set_defaults(func=cmd_coeffs)

    k = sub.add_parser("compare", help="compare against the RK4 reference solver")
    common(k)
    k.add_argument("--h", type=float, default=1e-3, help="RK4 step size")
    k.add_argument("--step", type=float, default=0.05, help="comparison grid step")
    k.add_argument("--tol", type=float, default=1e-3)
    k.set_defaults(func=cmd_compare)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _BLOWUP as exc:
        print(f"error: solver blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (DDEError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
