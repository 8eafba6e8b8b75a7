"""Command-line front end.

Exit codes: 0 ok, 1 ``example`` deviated from the reference values,
2 usage error, 3 problem document error, 4 solver or certificate error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import certificates as cert
from .bench import batch_to_json, compare_batch
from .errors import CertificateFailed, DimensionMismatch, InvFreeError, ParseError, PointOutsideDomain
from .problem import builtin_problem, estimate_second_derivative_bound, resolve_problem
from .solver import SolveOptions, SolveTrace, Verdict, solve

EXIT_DEVIATION = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_NUMERIC = 4

_PROBLEM_ERRORS = (ParseError, DimensionMismatch, PointOutsideDomain, FileNotFoundError, IsADirectoryError, KeyError)

# reference values of the worked two-equation example
REFERENCE_TABLE = [
    (1.2, 1.7),
    (1.234876263286, 1.660979680824),
    (1.234275470964, 1.661525517833),
    (1.234274484119, 1.661526466792),
    (1.234274484114, 1.661526466796),
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="invfree", description="Inverse-free order-2 solver and convergence certificates.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run the iteration and print the iterate table")
    p.add_argument("--problem", required=True, help="builtin name or path to a JSON problem")
    p.add_argument("--method", choices=["kogan", "newton"], default="kogan")
    p.add_argument("--tol", type=_positive_float)
    p.add_argument("--max-iter", type=_positive_int)
    p.add_argument("--norm", choices=["max", "euclidean"])
    p.add_argument("--trace-out", type=Path)

    p = sub.add_parser("certify", help="check a convergence certificate at the initial point")
    p.add_argument("--problem", required=True)
    p.add_argument("--theorem", required=True, choices=["1", "2", "3", "nk"])
    p.add_argument("--grid", type=_positive_int, default=33, help="grid points per axis for L")
    p.add_argument("--norm", choices=["max", "euclidean"])

    p = sub.add_parser("bench", help="compare both methods on every problem in a directory")
    p.add_argument("--problems", required=True, type=Path)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("sequences", help="print the bound-sequence recurrences for a given h")
    p.add_argument("--h", required=True, type=float)
    p.add_argument("--k", required=True, type=_positive_int)

    p = sub.add_parser("regions", help="emit the existence balls G0, G1 and their fit in the domain")
    p.add_argument("--problem", required=True)
    p.add_argument("--out", type=Path)
    p.add_argument("--theorem", choices=["2", "3"], default="3")
    p.add_argument("--grid", type=_positive_int, default=33)

    sub.add_parser("example", help="reproduce the worked two-equation example end to end")
    return parser


def _g(v, digits=12) -> str:
    return f"{float(v):.{digits}g}"


def _vec(v) -> str:
    return "(" + ", ".join(_g(x) for x in v) + ")"


def format_table(t: SolveTrace) -> str:
    rows = [(str(s.k), _vec(s.x), _vec(s.residual)) for s in t.states]
    widths = [max(len(r[i]) for r in rows + [("i", "X(i)", "P(X(i))")]) for i in range(3)]
    head = ("i", "X(i)", "P(X(i))")
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def _cmd_solve(args, out) -> int:
    p = resolve_problem(args.problem)
    o = SolveOptions.for_problem(p, tolerance=args.tol, max_iterations=args.max_iter, norm=args.norm)
    method = "inverse_free" if args.method == "kogan" else "newton"
    t = solve(p, method, o)
    print(format_table(t), file=out)
    c = t.counters
    print(
        f"verdict: {t.verdict.value}  steps: {t.steps}  inversions: {c.inversions}  "
        f"linear_solves: {c.linear_solves}  matrix_multiplications: {c.matrix_multiplications}  "
        f"jacobian_evaluations: {c.jacobian_evaluations}",
        file=out,
    )
    if args.trace_out:
        args.trace_out.write_text(t.to_csv(), encoding="utf-8")
    if t.verdict is Verdict.SINGULAR_AT_START:
        print(f"error: {t.message}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def _certificate_for(p, theorem: str, L: float, norm=None):
    if theorem == "1":
        return cert.problem_theorem1_certificate(p, L, norm)
    if theorem == "2":
        return cert.theorem2_certificate(p, L)
    if theorem == "3":
        return cert.theorem3_certificate(p, L)
    return cert.problem_newton_kantorovich_certificate(p, L, norm)


def _cmd_certify(args, out) -> int:
    p = resolve_problem(args.problem)
    L = estimate_second_derivative_bound(p, args.grid).L
    c = _certificate_for(p, args.theorem, L, args.norm)
    print(c.to_json(), file=out)
    return 0


def _cmd_bench(args, out) -> int:
    if not args.problems.is_dir():
        raise FileNotFoundError(f"{args.problems} is not a directory")
    text = batch_to_json(compare_batch(args.problems))
    if args.out:
        args.out.write_text(text + "\n", encoding="utf-8")
    else:
        print(text, file=out)
    return 0


def _cmd_sequences(args, out) -> int:
    seq = cert.bound_sequences(args.h, args.k)
    cols = ["k", "alpha", "beta", "A", "c", "epsilon", "q", "gamma", "N"]
    print(",".join(cols), file=out)
    for r in seq.rows:
        print(",".join([str(r.k)] + [f"{getattr(r, name):.17g}" for name in cols[1:]]), file=out)
    return 0


def region_balls(p, theorem: str = "3", grid: int = 33):
    """Certificate at x0 plus the a-priori ball around x1 (G0, G1)."""
    L = estimate_second_derivative_bound(p, grid).L
    c0 = cert.theorem2_certificate(p, L) if theorem == "2" else cert.theorem3_certificate(p, L)
    if not c0.passed:
        raise CertificateFailed(f"Theorem {theorem} does not hold at x0 ({c0.details})")
    t = solve(p, "inverse_free", SolveOptions.for_problem(p, max_iterations=1))
    x1 = t.states[1].x if len(t.states) > 1 else t.states[0].x
    geometry = cert.region_geometry(
        [cert.ball_from_certificate(c0, "G0"), cert.refined_ball(c0, x1, 1, "G1")], p.lower, p.upper
    )
    return c0, geometry


def _cmd_regions(args, out) -> int:
    p = resolve_problem(args.problem)
    _, geometry = region_balls(p, args.theorem, args.grid)
    text = geometry.to_csv()
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    print(text, end="", file=out)
    return 0


def run_example(out) -> list[str]:
    """Replay the worked example; returns the list of deviations (empty on success)."""
    deviations = []

    def check(ok, what):
        if not ok:
            deviations.append(what)

    p = builtin_problem("paper_example")
    a = cert.kogan_constant().a
    bound = estimate_second_derivative_bound(p, 33)
    print(f"Problem: {p.name}  x0 = {_vec(p.initial_point)}  domain = {_vec(p.lower)} .. {_vec(p.upper)}", file=out)
    print(f"a = {a:.15f}  L = {bound.L:.6g} at {_vec(bound.argmax_point)}", file=out)
    check(abs(bound.L - 15.6) <= 0.05, f"L = {bound.L} (expected 15.6)")

    c2 = cert.theorem2_certificate(p, bound.L)
    verdict2 = "PASS (h <= a)" if c2.passed else "FAIL (h > a)"
    print(f"Theorem 2: {verdict2}  B = {c2.B:.6g}  eta = {c2.eta:.6g}  K = {c2.K:.6g}  h = {c2.h:.6g}", file=out)
    check(not c2.passed, "Theorem 2 unexpectedly passed")
    check(abs(c2.eta - 0.434) <= 1e-6, f"Theorem 2 eta = {c2.eta}")
    check(0.268 <= c2.B <= 0.270, f"Theorem 2 B = {c2.B}")

    c3 = cert.theorem3_certificate(p, bound.L)
    verdict3 = "PASS (h <= a)" if c3.passed else "FAIL (h > a)"
    ev = c3.diagnostics.get("gram_eigenvalues", [np.nan, np.nan])
    print(f"Theorem 3: {verdict3}  B = {c3.B:.6g}  eta = {c3.eta:.6g}  K = {c3.K:.6g}  h = {c3.h:.6g}", file=out)
    print(f"  eigenvalues of U0 U0^T: {ev[0]:.6g}, {ev[1]:.6g}  r0 = {c3.ball_radius:.6g}", file=out)
    check(c3.passed, "Theorem 3 failed")
    check(abs(c3.eta - 0.476) <= 1e-3, f"Theorem 3 eta = {c3.eta}")
    check(abs(c3.B - 0.11) <= 1e-3, f"Theorem 3 B = {c3.B}")
    check(abs(c3.ball_radius - 0.115) <= 1e-3, f"r0 = {c3.ball_radius}")

    t = solve(p, "inverse_free", SolveOptions.for_problem(p, tolerance=1e-14))
    print("", file=out)
    print(format_table(t), file=out)
    print(f"verdict: {t.verdict.value}  steps: {t.steps}  inversions: {t.counters.inversions}", file=out)
    check(t.verdict is Verdict.CONVERGED and t.steps <= 5, f"solve: {t.verdict.value} after {t.steps} steps")
    check(t.counters.inversions == 1, f"{t.counters.inversions} inversions")
    for s, ref in zip(t.states[1:5], REFERENCE_TABLE[1:]):
        err = float(np.max(np.abs(s.x - np.array(ref))))
        check(err <= 1e-9, f"row {s.k} differs from the table by {err:.3g}")

    _, geometry = region_balls(p)
    print("", file=out)
    print(f"Regions (domain {_vec(p.lower)} .. {_vec(p.upper)}):", file=out)
    for ball, ok in zip(geometry.balls, geometry.contained):
        print(f"  {ball.label}: center {_vec(ball.center)}  radius {ball.radius:.6g}  inside D: {'yes' if ok else 'no'}", file=out)
    g0, g1 = geometry.balls
    check(not geometry.contained[0], "G0 unexpectedly inside D")
    check(geometry.contained[1], "G1 not inside D")
    check(abs(g1.radius - 0.028) <= 0.002, f"G1 radius = {g1.radius}")

    print("", file=out)
    print("all reference checks passed" if not deviations else f"{len(deviations)} deviation(s)", file=out)
    return deviations


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "solve": _cmd_solve,
        "certify": _cmd_certify,
        "bench": _cmd_bench,
        "sequences": _cmd_sequences,
        "regions": _cmd_regions,
    }
    try:
        if args.command == "example":
            deviations = run_example(out)
            for d in deviations:
                print(f"deviation: {d}", file=sys.stderr)
            return EXIT_DEVIATION if deviations else 0
        return handlers[args.command](args, out)
    except _PROBLEM_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InvFreeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
