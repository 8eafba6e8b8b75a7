import csv
import io

import numpy as np
import pytest

from invfree.cli import REFERENCE_TABLE
from invfree.errors import NonFiniteValue, SingularNewtonStep
from invfree.problem import builtin_problem, make_problem
from invfree.solver import (
    Counters,
    SolveOptions,
    Verdict,
    empirical_error_sequence,
    initial_state,
    solve,
    squaring_defect,
    step_inverse_free,
)


def test_example_iterates_match_table(worked):
    t = solve(worked, "inverse_free", SolveOptions.for_problem(worked, tolerance=1e-14))
    assert t.verdict is Verdict.CONVERGED
    assert t.steps <= 5
    for s, ref in zip(t.states, REFERENCE_TABLE):
        np.testing.assert_allclose(s.x, ref, atol=1e-9)
    assert t.counters.inversions == 1
    assert t.counters.linear_solves == 0


def test_example_residual_magnitudes(worked):
    t = solve(worked, "inverse_free", SolveOptions.for_problem(worked, tolerance=1e-14))
    for k, ref in ((2, 1.2e-5), (3, 5.3e-11)):
        assert ref / 3 <= t.states[k].residual_norm <= 3 * ref


def test_squaring_identity_every_step(builtin):
    s = initial_state(builtin)
    for _ in range(6):
        nxt = step_inverse_free(builtin, s)
        assert squaring_defect(builtin, s, nxt) < 1e-10
        s = nxt


def test_single_inversion_and_counter_growth(builtin):
    t = solve(builtin)
    c = t.counters
    assert t.verdict is Verdict.CONVERGED
    assert c.inversions == 1
    assert c.matrix_multiplications == 2 * t.steps
    assert c.jacobian_evaluations == t.steps + 1


def test_newton_counts_one_solve_per_step(builtin):
    t = solve(builtin, "newton")
    assert t.verdict is Verdict.CONVERGED
    assert t.counters.inversions == 0
    assert t.counters.linear_solves == t.steps


def test_methods_agree(builtin):
    a = solve(builtin, "inverse_free").final.x
    b = solve(builtin, "newton").final.x
    assert np.max(np.abs(a - b)) <= 1e-10


def test_residual_decreases_on_certified_runs(builtin):
    t = solve(builtin)
    norms = [s.residual_norm for s in t.states]
    # once past the first few steps every residual drop is at least tenfold until round-off
    for a, b in zip(norms, norms[1:]):
        if a > 1e-12:
            assert b < a


def test_linear_problem_reaches_root_and_fixes_u():
    p = builtin_problem("linear_2x2")
    t = solve(p)
    np.testing.assert_allclose(t.final.x, [2.0, 3.0], atol=1e-14)
    assert t.steps <= 2
    s0 = initial_state(p)
    s1 = step_inverse_free(p, s0)
    np.testing.assert_allclose(s1.U, s0.U, atol=1e-15)


def test_scalar_converges_to_sqrt2():
    t = solve(builtin_problem("scalar_sqrt2"))
    assert t.final.x[0] == pytest.approx(2**0.5, abs=1e-15)


def test_already_converged_start():
    p = make_problem("at_root", ["x"], ["x - 1"], [1.0], [0.0], [2.0])
    t = solve(p)
    assert t.verdict is Verdict.CONVERGED and t.steps == 0


def test_singular_at_start_for_both_methods():
    p = make_problem("flat", ["x", "y"], ["x^2 + y^2 - 1", "x - y"], [0.0, 0.0], [-1.0, -1.0], [1.0, 1.0])
    q = make_problem("sing", ["x", "y"], ["x + y - 1", "2*x + 2*y - 3"], [0.0, 0.0], [-1.0, -1.0], [1.0, 1.0])
    for prob in (p, q):
        for method in ("inverse_free", "newton"):
            t = solve(prob, method)
            assert t.verdict is Verdict.SINGULAR_AT_START
            assert t.steps == 0


def test_newton_singular_later_raises():
    # x1 = 2 - f(2)/f'(2) = 1, where the derivative vanishes
    q = make_problem("hit", ["x"], ["(x - 1)^2 + 1"], [2.0], [0.0], [3.0])
    with pytest.raises(SingularNewtonStep):
        solve(q, "newton")


def test_divergence_and_max_iterations():
    cube_root = make_problem("cbrt", ["x"], ["sqrt(x^2)^(1/3) * x/sqrt(x^2)"], [1.0], [-1e3], [1e3])
    # Newton doubles |x| with alternating sign, so the residual grows without bound
    assert solve(cube_root, "newton").verdict is Verdict.DIVERGED
    cycle = make_problem("cycle", ["x"], ["x^3 - 2*x + 2"], [0.0], [-5.0], [5.0])
    t = solve(cycle, "newton", SolveOptions(max_iterations=20))
    assert t.verdict is Verdict.MAX_ITERATIONS and t.steps == 20


def test_overflow_propagates_as_non_finite():
    grow = make_problem("grow", ["x"], ["exp(x) - 1"], [-10.0], [-20.0], [20.0])
    with pytest.raises(NonFiniteValue):
        solve(grow, "inverse_free")


def test_options_validation_and_overrides(worked):
    with pytest.raises(ValueError):
        SolveOptions(tolerance=0.0)
    with pytest.raises(ValueError):
        SolveOptions(max_iterations=0)
    with pytest.raises(ValueError):
        SolveOptions(norm="l1")
    o = SolveOptions.for_problem(worked, tolerance=None, norm="euclidean")
    assert o.tolerance == 1e-14 and o.norm == "euclidean"
    with pytest.raises(ValueError):
        solve(worked, "secant")


def test_trace_csv(worked):
    t = solve(worked)
    rows = list(csv.reader(io.StringIO(t.to_csv())))
    assert rows[0] == ["k", "x_1", "x_2", "res_1", "res_2", "residual_norm", "step_norm"]
    assert len(rows) == t.steps + 2
    assert float(rows[2][1]) == t.states[1].x[0]


def test_error_sequence(worked):
    t = solve(worked)
    e = empirical_error_sequence(t, t.final.x)
    assert e[0] > e[1] > e[2]
    assert e[-1] > 0.0
    bad = solve(worked, options=SolveOptions(max_iterations=1))
    with pytest.raises(ValueError):
        empirical_error_sequence(bad, t.final.x)


def test_counters_dict():
    assert Counters(inversions=1).as_dict()["inversions"] == 1
