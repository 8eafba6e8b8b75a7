"""Convergence-order estimates, cost comparison and certify-then-restart."""
from __future__ import annotations

import json
import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from .certificates import Certificate, theorem2_certificate, theorem3_certificate
from .errors import InsufficientSamples, InvFreeError
from .problem import ProblemSpec, estimate_second_derivative_bound, load_problem
from .solver import (
    Counters,
    SolveOptions,
    SolveTrace,
    Verdict,
    empirical_error_sequence,
    initial_state,
    solve,
    step_inverse_free,
)

NOISE_FACTOR = 1e2
REFERENCE_TOLERANCE = 1e-14


@dataclass(frozen=True)
class OrderEstimate:
    rho: float
    samples_used: int
    ratios: tuple[float, ...]


def estimate_order(errors) -> OrderEstimate:
    """Median of log(e[k+1]/e[k]) / log(e[k]/e[k-1]) over the usable triples.

    A triple is usable when e[k+1] sits above the noise floor
    100 * machine-epsilon * e[0].
    """
    e = [float(v) for v in errors]
    if len(e) < 4:
        raise InsufficientSamples(f"need at least 4 errors, got {len(e)}")
    if any(v <= 0.0 for v in e):
        raise ValueError("errors must be strictly positive")
    if any(b >= a for a, b in zip(e, e[1:])):
        raise ValueError("errors must be strictly decreasing")
    floor = NOISE_FACTOR * np.finfo(float).eps * e[0]
    ratios = tuple(
        math.log(e[k + 1] / e[k]) / math.log(e[k] / e[k - 1])
        for k in range(1, len(e) - 1)
        if e[k + 1] > floor
    )
    if not ratios:
        raise InsufficientSamples("every triple is below the noise floor")
    return OrderEstimate(statistics.median(ratios), len(ratios), ratios)


def reference_root(p: ProblemSpec, method="inverse_free", o: SolveOptions | None = None) -> np.ndarray | None:
    """Final iterate of a run at tolerance 1e-14, used as x* for error sequences."""
    o = o or SolveOptions.for_problem(p)
    t = solve(p, method, replace(o, tolerance=min(o.tolerance, REFERENCE_TOLERANCE)))
    return t.final.x if t.verdict is Verdict.CONVERGED else None


def trace_order(t: SolveTrace, x_star=None) -> OrderEstimate:
    """Order estimate of a converged trace against x* (default: its final iterate)."""
    x_star = t.final.x if x_star is None else x_star
    return estimate_order(empirical_error_sequence(t, x_star))


@dataclass
class MethodSummary:
    verdict: str
    steps: int
    counters: dict
    final_residual_norm: float
    root: list[float] | None
    order: float | None = None
    error: str = ""

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d.update(self.counters)
        del d["counters"]
        return d


@dataclass
class ComparisonReport:
    problem: str
    methods: dict[str, MethodSummary] = field(default_factory=dict)
    roots_agree: bool | None = None

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "methods": {k: v.to_dict() for k, v in self.methods.items()},
            "roots_agree": self.roots_agree,
        }


def _summarize(p: ProblemSpec, method, o: SolveOptions) -> MethodSummary:
    try:
        t = solve(p, method, o)
    except InvFreeError as exc:
        return MethodSummary("Error", 0, Counters().as_dict(), math.nan, None, error=f"{type(exc).__name__}: {exc}")
    order = None
    if t.verdict is Verdict.CONVERGED:
        try:
            order = trace_order(t, reference_root(p, method, o)).rho
        except (InsufficientSamples, ValueError):
            order = None
    if method == "inverse_free" and t.verdict is Verdict.CONVERGED and t.counters.inversions != 1:
        raise RuntimeError(f"inverse-free run made {t.counters.inversions} inversions")
    root = t.final.x.tolist() if t.verdict is Verdict.CONVERGED else None
    return MethodSummary(t.verdict.value, t.steps, t.counters.as_dict(), t.final.residual_norm, root, order, t.message)


def compare(p: ProblemSpec, o: SolveOptions | None = None, root_tolerance: float = 1e-10) -> ComparisonReport:
    """Run both methods from the same start with the same options."""
    o = o or SolveOptions.for_problem(p)
    report = ComparisonReport(p.name)
    for method in ("inverse_free", "newton"):
        report.methods[method] = _summarize(p, method, o)
    a, b = report.methods["inverse_free"].root, report.methods["newton"].root
    if a is not None and b is not None:
        report.roots_agree = bool(np.max(np.abs(np.subtract(a, b))) <= root_tolerance)
    return report


def compare_batch(directory, o: SolveOptions | None = None, max_workers: int = 1) -> list[ComparisonReport]:
    """Compare every ``*.json`` problem in ``directory``; reports sorted by problem name.

    All documents are parsed before any solve starts.
    """
    problems = [load_problem(path) for path in sorted(Path(directory).glob("*.json"))]
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        reports = list(pool.map(lambda p: compare(p, o), problems))
    return sorted(reports, key=lambda r: r.problem)


def batch_to_json(reports: list[ComparisonReport]) -> str:
    return json.dumps({"reports": [r.to_dict() for r in reports]}, indent=2)


def certify_then_solve(
    p: ProblemSpec,
    theorem: Literal["T2", "T3"] = "T3",
    max_restarts: int = 0,
    grid: int = 33,
    options: SolveOptions | None = None,
) -> tuple[list[Certificate], SolveTrace]:
    """Certify at x0; on failure take one inverse-free step and re-certify there.

    Each re-certification inverts the Jacobian afresh at the restart point,
    which becomes the new x0 of the final solve.
    """
    if max_restarts < 0:
        raise ValueError("max_restarts must be >= 0")
    certify = theorem2_certificate if theorem == "T2" else theorem3_certificate
    o = options or SolveOptions.for_problem(p)
    L = estimate_second_derivative_bound(p, grid).L

    certs = [certify(p, L)]
    state = initial_state(p, o.norm, Counters())
    for _ in range(max_restarts):
        if certs[-1].passed:
            break
        state = step_inverse_free(p, state, o.norm)
        certs.append(certify(p, L, at=state.x))
    start = p if state.k == 0 else p.with_initial_point(state.x)
    return certs, solve(start, "inverse_free", o)


def cost_dominance(report: ComparisonReport) -> bool | None:
    """True when the inverse-free run inverted fewer times than Newton solved."""
    inv, newton = report.methods["inverse_free"], report.methods["newton"]
    if inv.verdict != "Converged" or newton.verdict != "Converged":
        return None
    return inv.counters["inversions"] < newton.counters["linear_solves"]

