import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from heatlab.errors import ArityError, ParseError
from heatlab.expr import BinOp, Call, Neg, Num, Pow, Var, evaluate, parse, parse_field


def test_unary_minus_binds_looser_than_power():
    node = parse("-x1^2", 1)
    assert node == Neg(Pow(Var(1), Num(2.0)))
    assert evaluate(node, [[0.7]])[0] == pytest.approx(-0.49)


def test_function_call():
    f = parse_field("exp(x1)*sin(x2)", 2)
    assert f([[0.0, math.pi / 2]])[0, 0, 0] == pytest.approx(1.0)


def test_coordinate_beyond_dimension():
    with pytest.raises((ParseError, ArityError)) as info:
        parse("1 + x3", 2)
    assert info.value.position == 4


def test_precedence_and_associativity():
    pts = np.array([[2.0]])
    cases = {"2^3^2": 512.0, "2*3+4": 10.0, "2+3*4": 14.0, "8/4/2": 1.0, "10-4-3": 3.0,
             "(1+2)*3": 9.0, "2^-1": 0.5, "-2^2": -4.0, ".5e1 + 1.": 6.0, "--x1": 2.0,
             "sqrt(x1*8)": 4.0, "tanh(0)+cos(0)+log(1)": 1.0}
    for src, val in cases.items():
        assert evaluate(parse(src, 1), pts)[0] == pytest.approx(val), src


def test_ast_shape():
    assert parse("x1*x2 - 3", 2) == BinOp("-", BinOp("*", Var(1), Var(2)), Num(3.0))
    assert parse("exp(-x1)", 1) == Call("exp", Neg(Var(1)))


@pytest.mark.parametrize("src,pos", [("1 +", 3), ("x1 ** 2", 4), ("foo(x1)", 0), ("(x1", 3),
                                     ("x1 $ 2", 3), ("pi", 0), ("sin x1", 4), ("2 3", 2)])
def test_parse_errors_carry_position(src, pos):
    with pytest.raises(ParseError) as info:
        parse(src, 2)
    assert info.value.position == pos
    assert info.value.expected
    assert f"position {pos}" in str(info.value)


def test_matrix_field_complex_entries():
    f = parse_field([["x1", ["0", "x1"]], [["0", "-x1"], 0]], 1, 2)
    out = f(np.array([[2.0], [3.0]]))
    assert out.shape == (2, 2, 2)
    assert np.allclose(out[0], [[2, 2j], [-2j, 0]])


def test_matrix_shape_mismatch():
    with pytest.raises(ArityError):
        parse_field([["x1", "0"]], 1, 2)
    with pytest.raises(ArityError):
        parse_field([["x1", "0"], ["0"]], 1, 2)
    with pytest.raises(ArityError):
        parse_field("x1", 1, 2)


def test_scalar_complex_pair():
    f = parse_field(["x1", "2"], 1)
    assert f([[1.5]])[0, 0, 0] == 1.5 + 2j


_numbers = st.floats(-50, 50, allow_nan=False).map(lambda v: round(v, 3))


@given(_numbers, _numbers, _numbers)
def test_matches_python_arithmetic(a, b, c):
    src = f"({a}) + ({b}) * ({c}) - ({a}) / 7"
    assert evaluate(parse(src, 1), [[0.0]])[0] == pytest.approx(a + b * c - a / 7, rel=1e-12, abs=1e-12)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_evaluation_deterministic(u, v):
    f = parse_field("exp(-x1^2)*cos(x2) + x1*x2", 2)
    pts = np.array([[u, v]])
    assert np.array_equal(f(pts), f(pts))
    assert f(pts)[0, 0, 0].real == pytest.approx(math.exp(-u * u) * math.cos(v) + u * v)
