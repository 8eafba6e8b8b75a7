"""Inverse-free order-2 iteration for nonlinear systems, with semilocal certificates."""
from .bench import certify_then_solve, compare, estimate_order
from .certificates import (
    apriori_error_bound,
    bound_sequences,
    kogan_constant,
    newton_kantorovich_certificate,
    region_geometry,
    theorem1_certificate,
    theorem2_certificate,
    theorem3_certificate,
)
from .problem import (
    ProblemSpec,
    builtin_problem,
    builtin_problems,
    estimate_second_derivative_bound,
    evaluate_jacobian,
    evaluate_residual,
    parse_problem,
)
from .solver import SolveOptions, SolveTrace, Verdict, solve, step_inverse_free

__version__ = "0.1.0"
