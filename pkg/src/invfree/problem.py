"""Nonlinear systems P(x) = 0 defined by expression text.

Jacobians come from forward-mode dual numbers over the expression trees;
the second-derivative bound L is estimated on a grid over the box domain.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .dual import Dual
from .errors import (
    DimensionMismatch,
    GridTooLarge,
    NonFiniteValue,
    ParseError,
    PointOutsideDomain,
)
from .expr import Node, evaluate, parse_expression, to_text
from .linalg import as_matrix, as_vector

NormKind = Literal["max", "euclidean"]

MAX_GRID_EVALUATIONS = 10**7
MAX_GRID_DIMENSION = 6
_GRID_CHUNK = 50_000


@dataclass(frozen=True)
class ProblemOptions:
    tolerance: float = 1e-13
    max_iterations: int = 50
    norm: NormKind = "max"


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    variables: tuple[str, ...]
    equations: tuple[Node, ...]
    initial_point: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    options: ProblemOptions = field(default_factory=ProblemOptions)

    def __post_init__(self):
        n = len(self.variables)
        if n < 1:
            raise DimensionMismatch("a problem needs at least one variable")
        if len(self.equations) != n:
            raise DimensionMismatch(f"{len(self.equations)} equations for {n} variables")
        for vec, what in ((self.initial_point, "initial_point"), (self.lower, "domain.lower"), (self.upper, "domain.upper")):
            if vec.shape != (n,):
                raise DimensionMismatch(f"{what} has {vec.size} entries, expected {n}")
        if not np.all(self.lower < self.upper):
            raise ValueError("domain must satisfy lower < upper on every axis")
        if not np.all((self.lower <= self.initial_point) & (self.initial_point <= self.upper)):
            raise PointOutsideDomain(f"initial point {self.initial_point.tolist()} is outside the domain")

    @property
    def n(self) -> int:
        return len(self.variables)

    def with_initial_point(self, x) -> "ProblemSpec":
        """Same system restarted at ``x`` (the box is widened if needed to hold it)."""
        x = as_vector(x)
        return ProblemSpec(
            self.name,
            self.variables,
            self.equations,
            x,
            as_vector(np.minimum(self.lower, x)),
            as_vector(np.maximum(self.upper, x)),
            self.options,
        )

    def to_document(self) -> dict:
        return {
            "name": self.name,
            "variables": list(self.variables),
            "equations": [to_text(e) for e in self.equations],
            "initial_point": self.initial_point.tolist(),
            "domain": {"lower": self.lower.tolist(), "upper": self.upper.tolist()},
            "options": {
                "tolerance": self.options.tolerance,
                "max_iterations": self.options.max_iterations,
                "norm": self.options.norm,
            },
        }


def make_problem(name, variables, equations, initial_point, lower, upper, **options) -> ProblemSpec:
    """Build a ProblemSpec from expression strings."""
    variables = tuple(variables)
    nodes = tuple(parse_expression(text, variables, line=i + 1) for i, text in enumerate(equations))
    return ProblemSpec(
        name,
        variables,
        nodes,
        as_vector(initial_point),
        as_vector(lower),
        as_vector(upper),
        ProblemOptions(**options),
    )


_TOP_KEYS = {"name", "variables", "equations", "initial_point", "domain", "options"}
_OPTION_KEYS = {"tolerance", "max_iterations", "norm"}


def _require(doc, key, kind):
    if key not in doc:
        raise ParseError(f"missing field {key!r}")
    if not isinstance(doc[key], kind):
        raise ParseError(f"field {key!r} has the wrong type")
    return doc[key]


def _numbers(values, what) -> list[float]:
    if not isinstance(values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in values
    ):
        raise ParseError(f"{what} must be a list of numbers")
    return [float(v) for v in values]


def parse_problem(text: str) -> ProblemSpec:
    """Parse a JSON problem document (see README for the schema)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise ParseError("problem document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ParseError(f"unknown field(s): {', '.join(sorted(unknown))}")

    name = _require(doc, "name", str)
    variables = _require(doc, "variables", list)
    if not variables or not all(isinstance(v, str) and v.isidentifier() for v in variables):
        raise ParseError("variables must be a non-empty list of identifiers")
    if len(set(variables)) != len(variables):
        raise ParseError("variable names must be unique")
    equations = _require(doc, "equations", list)
    if not all(isinstance(e, str) for e in equations):
        raise ParseError("equations must be strings")
    if len(equations) != len(variables):
        raise DimensionMismatch(f"{len(equations)} equations for {len(variables)} variables")
    x0 = _numbers(_require(doc, "initial_point", list), "initial_point")
    domain = _require(doc, "domain", dict)
    if set(domain) != {"lower", "upper"}:
        raise ParseError("domain must have exactly the fields 'lower' and 'upper'")
    lower = _numbers(domain["lower"], "domain.lower")
    upper = _numbers(domain["upper"], "domain.upper")
    n = len(variables)
    for vec, what in ((x0, "initial_point"), (lower, "domain.lower"), (upper, "domain.upper")):
        if len(vec) != n:
            raise DimensionMismatch(f"{what} has {len(vec)} entries, expected {n}")

    opts = doc.get("options", {})
    if not isinstance(opts, dict):
        raise ParseError("options must be an object")
    unknown = set(opts) - _OPTION_KEYS
    if unknown:
        raise ParseError(f"unknown option(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    if "tolerance" in opts:
        tol = opts["tolerance"]
        if not isinstance(tol, (int, float)) or isinstance(tol, bool) or not tol > 0:
            raise ParseError("options.tolerance must be a positive number")
        kwargs["tolerance"] = float(tol)
    if "max_iterations" in opts:
        mi = opts["max_iterations"]
        if not isinstance(mi, int) or isinstance(mi, bool) or mi < 1:
            raise ParseError("options.max_iterations must be an integer >= 1")
        kwargs["max_iterations"] = mi
    if "norm" in opts:
        if opts["norm"] not in ("max", "euclidean"):
            raise ParseError("options.norm must be 'max' or 'euclidean'")
        kwargs["norm"] = opts["norm"]

    if not all(a < b for a, b in zip(lower, upper)):
        raise ParseError("domain.lower must be strictly below domain.upper on every axis")
    return make_problem(name, variables, equations, x0, lower, upper, **kwargs)


def load_problem(path) -> ProblemSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_problem(fh.read())


def _check_finite(values: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = int(np.argwhere(bad)[0][0])
        raise NonFiniteValue(f"{what} component {idx} is not finite", component=idx)


def evaluate_residual(p: ProblemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({p.n},)")
    env = [float(v) for v in x]
    with np.errstate(all="ignore"):
        out = np.array([float(evaluate(e, env)) for e in p.equations])
    _check_finite(out, "residual")
    out.setflags(write=False)
    return out


def _dual_env(points: np.ndarray) -> list[Dual]:
    """Seed one Dual per coordinate; ``points`` has shape (n,) or (n, m)."""
    n = points.shape[0]
    return [Dual.variable(points[j], j, n) for j in range(n)]


def _gradients(p: ProblemSpec, points: np.ndarray) -> np.ndarray:
    """Jacobians at each point: shape (n_eq, n_var) + points.shape[1:]."""
    env = _dual_env(points)
    rows = []
    for e in p.equations:
        r = evaluate(e, env)
        if isinstance(r, Dual):
            rows.append(np.broadcast_to(r.grad, (p.n,) + points.shape[1:]))
        else:
            rows.append(np.zeros((p.n,) + points.shape[1:]))
    return np.array(rows)


def evaluate_jacobian(p: ProblemSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (p.n,):
        raise DimensionMismatch(f"point has shape {x.shape}, expected ({p.n},)")
    with np.errstate(all="ignore"):
        jac = _gradients(p, x.copy())
    bad = ~np.isfinite(jac)
    if np.any(bad):
        idx = int(np.argwhere(bad)[0][0])
        raise NonFiniteValue(f"Jacobian row {idx} is not finite", component=idx)
    return as_matrix(jac)


@dataclass(frozen=True)
class SecondDerivativeBound:
    L: float
    grid_points_per_axis: int
    argmax_point: np.ndarray
    argmax_index: tuple[int, int, int]


def _second_partials(p: ProblemSpec, pts: np.ndarray) -> np.ndarray:
    """|d2 f_i / dx_j dx_k| at each column of ``pts``; shape (n, n, n, m)."""
    n, m = pts.shape
    step0 = np.finfo(float).eps ** (1.0 / 3.0)
    out = np.empty((n, n, n, m))
    for j in range(n):
        h = step0 * np.maximum(1.0, np.abs(pts[j]))
        plus = pts.copy()
        minus = pts.copy()
        plus[j] += h
        minus[j] -= h
        width = plus[j] - minus[j]
        g_plus = _gradients(p, plus)
        g_minus = _gradients(p, minus)
        # g[i, k] = d f_i / dx_k; differentiate along x_j
        out[:, j, :, :] = (g_plus - g_minus) / width
    return np.abs(out)


def estimate_second_derivative_bound(p: ProblemSpec, grid_points_per_axis: int = 33) -> SecondDerivativeBound:
    """Grid estimate of L = max |d2 f_i / dx_j dx_k| over the box.

    The grid is uniform with the box corners included. Second partials are
    central differences of the dual-number gradient, so this is an estimate,
    not a rigorous enclosure.
    """
    g = int(grid_points_per_axis)
    if g < 2:
        raise ValueError("grid_points_per_axis must be >= 2")
    n = p.n
    if n > MAX_GRID_DIMENSION:
        raise GridTooLarge(f"grid estimation is limited to n <= {MAX_GRID_DIMENSION}, got {n}")
    evaluations = g**n * 2 * n
    if evaluations > MAX_GRID_EVALUATIONS:
        raise GridTooLarge(f"{g}^{n} grid needs {evaluations} gradient evaluations (limit {MAX_GRID_EVALUATIONS})")

    axes = [np.linspace(lo, hi, g) for lo, hi in zip(p.lower, p.upper)]
    best = -1.0
    best_point = None
    best_index = (0, 0, 0)
    combos = itertools.product(*axes)
    total = g**n
    done = 0
    with np.errstate(all="ignore"):
        while done < total:
            chunk = np.array(list(itertools.islice(combos, _GRID_CHUNK)), dtype=float).T
            done += chunk.shape[1]
            vals = _second_partials(p, chunk)
            if not np.all(np.isfinite(vals)):
                raise NonFiniteValue("second derivative is not finite somewhere in the domain")
            flat = int(np.argmax(vals))
            i, j, k, col = np.unravel_index(flat, vals.shape)
            if vals[i, j, k, col] > best:
                best = float(vals[i, j, k, col])
                best_point = chunk[:, col].copy()
                best_index = (int(i), int(j), int(k))
    return SecondDerivativeBound(best, g, as_vector(best_point), best_index)


def _builtin_specs() -> list[ProblemSpec]:
    return [
        make_problem(
            "paper_example",
            ["x1", "x2"],
            ["2*x1^3 - x2^2 - 1", "x1*x2^3 - x2 - 4"],
            [1.2, 1.7],
            [0.0, 0.0],
            [1.3, 1.8],
            tolerance=1e-14,
        ),
        make_problem("scalar_sqrt2", ["x1"], ["x1^2 - 2"], [1.5], [1.0], [2.0]),
        make_problem(
            "linear_2x2",
            ["x1", "x2"],
            ["3*x1 + x2 - 9", "x1 + 2*x2 - 8"],
            [0.0, 0.0],
            [-5.0, -5.0],
            [5.0, 5.0],
        ),
        # root at (1, 1, 1)
        make_problem(
            "mild_3x3",
            ["x1", "x2", "x3"],
            [
                "4*x1 - x2*x3/4 - 3.75",
                "x1^2/2 + 4*x2 - x3/2 - 4",
                "exp(x1 - 1)/2 + x2 + 5*x3 - 6.5",
            ],
            [0.9, 1.1, 0.95],
            [0.6, 0.6, 0.6],
            [1.4, 1.4, 1.4],
        ),
    ]


_BUILTINS = {spec.name: spec for spec in _builtin_specs()}

#: known exact roots of the builtin problems (paper_example has none in closed form)
BUILTIN_ROOTS = {
    "scalar_sqrt2": (math.sqrt(2.0),),
    "linear_2x2": (2.0, 3.0),
    "mild_3x3": (1.0, 1.0, 1.0),
}


def builtin_problems() -> list[ProblemSpec]:
    return list(_BUILTINS.values())


def builtin_problem(name: str) -> ProblemSpec:
    try:
        return _BUILTINS[name]
    except KeyError:
        raise KeyError(f"no builtin problem {name!r}; choose from {', '.join(_BUILTINS)}") from None


def resolve_problem(ref: str) -> ProblemSpec:
    """A builtin name or a path to a JSON problem document."""
    if ref in _BUILTINS:
        return _BUILTINS[ref]
    return load_problem(ref)


def random_points_in_box(p: ProblemSpec, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(p.lower, p.upper, size=(count, p.n))


def finite_difference_jacobian(p: ProblemSpec, x: Sequence[float], rel_step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian; an independent check on the dual-number one."""
    x = np.asarray(x, dtype=float)
    jac = np.empty((p.n, p.n))
    for j in range(p.n):
        h = rel_step * max(1.0, abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        jac[:, j] = (evaluate_residual(p, xp) - evaluate_residual(p, xm)) / (xp[j] - xm[j])
    return jac
