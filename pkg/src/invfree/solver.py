"""The inverse-free order-2 iteration and a Newton baseline.

Inverse-free step (U_0 = J(x_0)^-1 is the only inversion ever made)::

    x_{k+1} = x_k - U_k P(x_k)
    U_{k+1} = (2I - U_k J(x_{k+1})) U_k
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Literal

import numpy as np

from .errors import SingularMatrix, SingularNewtonStep
from .linalg import invert, lu_factor, lu_solve, vector_norm
from .problem import NormKind, ProblemSpec, evaluate_jacobian, evaluate_residual

Method = Literal["inverse_free", "newton"]


class Verdict(str, Enum):
    CONVERGED = "Converged"
    MAX_ITERATIONS = "MaxIterations"
    DIVERGED = "Diverged"
    SINGULAR_AT_START = "SingularAtStart"


@dataclass
class Counters:
    inversions: int = 0
    linear_solves: int = 0
    jacobian_evaluations: int = 0
    residual_evaluations: int = 0
    matrix_multiplications: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class IterationState:
    k: int
    x: np.ndarray
    residual: np.ndarray
    residual_norm: float
    step_norm: float = 0.0
    U: np.ndarray | None = None


@dataclass(frozen=True)
class SolveOptions:
    tolerance: float = 1e-13
    max_iterations: int = 50
    norm: NormKind = "max"
    divergence_factor: float = 10.0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.norm not in ("max", "euclidean"):
            raise ValueError(f"unknown norm {self.norm!r}")

    @classmethod
    def for_problem(cls, p: ProblemSpec, **overrides) -> "SolveOptions":
        base = cls(p.options.tolerance, p.options.max_iterations, p.options.norm)
        return replace(base, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class SolveTrace:
    method: Method
    norm: NormKind
    states: list[IterationState] = field(default_factory=list)
    counters: Counters = field(default_factory=Counters)
    verdict: Verdict | None = None
    message: str = ""

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    @property
    def final(self) -> IterationState:
        return self.states[-1]

    def to_csv(self) -> str:
        n = self.states[0].x.size
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(
            ["k"]
            + [f"x_{i + 1}" for i in range(n)]
            + [f"res_{i + 1}" for i in range(n)]
            + ["residual_norm", "step_norm"]
        )
        for s in self.states:
            nums = list(s.x) + list(s.residual) + [s.residual_norm, s.step_norm]
            w.writerow([s.k] + [f"{float(v):.17g}" for v in nums])
        return buf.getvalue()


def initial_state(p: ProblemSpec, norm: NormKind = "max", counters: Counters | None = None, with_inverse=True) -> IterationState:
    """State at x_0; computes U_0 by the single LU inversion when asked."""
    counters = counters if counters is not None else Counters()
    x0 = p.initial_point
    r0 = evaluate_residual(p, x0)
    counters.residual_evaluations += 1
    U0 = None
    if with_inverse:
        J0 = evaluate_jacobian(p, x0)
        counters.jacobian_evaluations += 1
        U0 = invert(J0).inverse
        counters.inversions += 1
    return IterationState(0, x0, r0, vector_norm(r0, norm), 0.0, U0)


def step_inverse_free(p: ProblemSpec, s: IterationState, norm: NormKind = "max", counters: Counters | None = None) -> IterationState:
    """One inverse-free step: new point first, then the inverse update at it."""
    if s.U is None:
        raise ValueError("inverse-free step needs the current approximate inverse U")
    counters = counters if counters is not None else Counters()
    dx = s.U @ s.residual
    x_new = s.x - dx
    J_new = evaluate_jacobian(p, x_new)
    UJ = s.U @ J_new
    U_new = (2.0 * np.eye(p.n) - UJ) @ s.U
    counters.jacobian_evaluations += 1
    counters.matrix_multiplications += 2
    r_new = evaluate_residual(p, x_new)
    counters.residual_evaluations += 1
    x_new.setflags(write=False)
    U_new.setflags(write=False)
    return IterationState(s.k + 1, x_new, r_new, vector_norm(r_new, norm), vector_norm(dx, norm), U_new)


def step_newton(p: ProblemSpec, s: IterationState, norm: NormKind = "max", counters: Counters | None = None) -> IterationState:
    counters = counters if counters is not None else Counters()
    J = evaluate_jacobian(p, s.x)
    counters.jacobian_evaluations += 1
    dx = lu_solve(lu_factor(J), s.residual)
    counters.linear_solves += 1
    x_new = s.x - dx
    r_new = evaluate_residual(p, x_new)
    counters.residual_evaluations += 1
    x_new.setflags(write=False)
    return IterationState(s.k + 1, x_new, r_new, vector_norm(r_new, norm), vector_norm(dx, norm))


def solve(p: ProblemSpec, method: Method = "inverse_free", options: SolveOptions | None = None) -> SolveTrace:
    """Iterate until the residual or the relative step falls below tolerance.

    Raises SingularNewtonStep if a Newton Jacobian turns singular after x_0;
    evaluation failures (NonFiniteValue) propagate.
    """
    o = options or SolveOptions.for_problem(p)
    if method not in ("inverse_free", "newton"):
        raise ValueError(f"unknown method {method!r}")
    trace = SolveTrace(method, o.norm)
    try:
        state = initial_state(p, o.norm, trace.counters, with_inverse=(method == "inverse_free"))
    except SingularMatrix as exc:
        trace.states.append(IterationState(0, p.initial_point, evaluate_residual(p, p.initial_point), float("nan")))
        trace.verdict = Verdict.SINGULAR_AT_START
        trace.message = str(exc)
        return trace
    trace.states.append(state)
    if state.residual_norm <= o.tolerance:
        trace.verdict = Verdict.CONVERGED
        return trace

    r0 = state.residual_norm
    strikes = 0
    for _ in range(o.max_iterations):
        if method == "inverse_free":
            state = step_inverse_free(p, state, o.norm, trace.counters)
        else:
            try:
                state = step_newton(p, state, o.norm, trace.counters)
            except SingularMatrix as exc:
                if state.k == 0:
                    trace.verdict = Verdict.SINGULAR_AT_START
                    trace.message = str(exc)
                    return trace
                raise SingularNewtonStep(f"Jacobian singular at step {state.k}: {exc}") from exc
        trace.states.append(state)
        if state.residual_norm <= o.tolerance or state.step_norm <= o.tolerance * (1.0 + vector_norm(state.x, o.norm)):
            trace.verdict = Verdict.CONVERGED
            return trace
        strikes = strikes + 1 if state.residual_norm > o.divergence_factor * r0 else 0
        if strikes >= 3:
            trace.verdict = Verdict.DIVERGED
            trace.message = f"residual exceeded {o.divergence_factor:g} x initial on 3 consecutive steps"
            return trace
    trace.verdict = Verdict.MAX_ITERATIONS
    return trace


def empirical_error_sequence(t: SolveTrace, x_star) -> list[float]:
    """||x_k - x*|| in the trace's norm, with trailing exact zeros dropped."""
    if t.verdict is not Verdict.CONVERGED:
        raise ValueError(f"trace did not converge ({t.verdict})")
    x_star = np.asarray(x_star, dtype=float)
    errors = [vector_norm(s.x - x_star, t.norm) for s in t.states]
    while errors and errors[-1] == 0.0:
        errors.pop()
    return errors


def squaring_defect(p: ProblemSpec, before: IterationState, after: IterationState) -> float:
    """max |(I - J U_{k+1}) - (I - J U_k)^2| with J = J(x_{k+1})."""
    J = evaluate_jacobian(p, after.x)
    eye = np.eye(p.n)
    lhs = eye - J @ after.U
    base = eye - J @ before.U
    return float(np.max(np.abs(lhs - base @ base)))
