import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from invfree.dual import Dual
from invfree.errors import ParseError
from invfree.expr import BinOp, Call, Const, Neg, Var, evaluate, parse_expression, to_text

VARS = ("x1", "x2")


def ev(text, *xs):
    return evaluate(parse_expression(text, VARS), list(xs))


@pytest.mark.parametrize(
    "text,expected",
    [
        ("1 + 2*3", 7.0),
        ("(1 + 2)*3", 9.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("2^-1", 0.5),
        ("8/4/2", 1.0),
        ("1 - 2 - 3", -4.0),
        ("--3", 3.0),
        ("1.5e2 + .5", 150.5),
        ("sqrt(16) + abs(-2) + exp(0) + log(1) + sin(0) + cos(0)", 8.0),
    ],
)
def test_precedence_and_functions(text, expected):
    assert ev(text, 0.0, 0.0) == pytest.approx(expected)


def test_variables_follow_declared_order():
    assert ev("x1 - x2", 5.0, 3.0) == 2.0
    node = parse_expression("x2", VARS)
    assert node == Var(1, "x2")


def test_unary_minus_is_looser_than_power():
    assert parse_expression("-x1^2", VARS) == Neg(BinOp("^", Var(0, "x1"), Const(2.0)))


@pytest.mark.parametrize(
    "text,column",
    [("x1 +", 5), ("x3 * 2", 1), ("2 * (x1", 8), ("x1 $ 2", 4), ("sin x1", 5), ("", 1), ("1 2", 3)],
)
def test_parse_errors_carry_position(text, column):
    with pytest.raises(ParseError) as info:
        parse_expression(text, VARS, line=2)
    assert info.value.line == 2
    assert info.value.column == column


def test_unknown_variable_message():
    with pytest.raises(ParseError, match="unknown identifier 'x3'"):
        parse_expression("x1 + x3", VARS)


def test_integer_powers_are_exact_products():
    x = 1.2
    assert ev("x1^3", x, 0.0) == x * x * x
    d = evaluate(parse_expression("x1^3", VARS), [Dual.variable(x, 0, 2), Dual.variable(0.0, 1, 2)])
    assert d.grad[0] == pytest.approx(3 * x * x, rel=1e-15)


def test_non_integer_and_variable_exponents():
    assert ev("x1^0.5", 9.0, 0.0) == pytest.approx(3.0)
    assert ev("x1^x2", 2.0, 3.0) == pytest.approx(8.0)
    d = evaluate(parse_expression("x1^x2", VARS), [Dual.variable(2.0, 0, 2), Dual.variable(3.0, 1, 2)])
    np.testing.assert_allclose(d.grad, [12.0, 8.0 * math.log(2.0)])


def test_dual_rules_against_central_differences():
    f = "sin(x1*x2) + exp(x1)/x2 - sqrt(x1^2 + x2^2) + log(x2) * cos(x1) + abs(x1 - 3*x2)"
    node = parse_expression(f, VARS)
    x = np.array([0.7, 1.3])
    d = evaluate(node, [Dual.variable(x[0], 0, 2), Dual.variable(x[1], 1, 2)])
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        fd = (evaluate(node, list(x + e)) - evaluate(node, list(x - e))) / (2 * h)
        assert d.grad[j] == pytest.approx(fd, abs=1e-8)


def test_batched_dual_evaluation():
    node = parse_expression("x1*x2^2", VARS)
    pts = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    d = evaluate(node, [Dual.variable(pts[0], 0, 2), Dual.variable(pts[1], 1, 2)])
    np.testing.assert_allclose(d.val, pts[0] * pts[1] ** 2)
    np.testing.assert_allclose(d.grad[0], pts[1] ** 2)
    np.testing.assert_allclose(d.grad[1], 2 * pts[0] * pts[1])


# random expression trees for the round-trip property
leaves = st.one_of(
    st.floats(-5, 5, allow_nan=False).map(Const),
    st.sampled_from([Var(0, "x1"), Var(1, "x2")]),
)


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(BinOp, st.sampled_from("+-*"), children, children),
        st.builds(lambda a: BinOp("^", a, Const(2.0)), children),
        st.builds(Call, st.sampled_from(["sin", "cos"]), children),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@given(trees)
def test_pretty_print_round_trip(tree):
    reparsed = parse_expression(to_text(tree), VARS)
    rng = np.random.default_rng(0)
    with np.errstate(all="ignore"):
        for x in rng.uniform(-2, 2, size=(100, 2)):
            a = evaluate(tree, list(x))
            b = evaluate(reparsed, list(x))
            if math.isfinite(a):
                assert b == pytest.approx(a, rel=1e-15, abs=1e-15)
