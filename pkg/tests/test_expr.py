from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crnspace.expr import (
    BinOp,
    Const,
    ExpressionDomainError,
    ExpressionSyntaxError,
    Neg,
    Pow,
    Var,
    compile_numpy,
    falling_factorial_term,
    parse_expression,
)


def test_toxin_transcription_rate():
    e = parse_expression("20 / (1 + x[A])")
    assert e.species() == {"A"}
    assert e.evaluate({"A": 0}) == 20
    assert e.evaluate({"A": 3}) == 5


def test_precedence_and_unary_minus():
    e = parse_expression("2 + 3 * x[S] ^ 2 - -1")
    assert e.evaluate({"S": 2}) == 15
    assert parse_expression("-x[S]^2").evaluate({"S": 3}) == -9
    assert parse_expression("x[S]^-1").evaluate({"S": 4}) == Fraction(1, 4)


def test_rational_literals_fold():
    assert parse_expression("1/2") == Const(Fraction(1, 2))
    assert parse_expression("-3") == Const(Fraction(-3))


def test_division_by_zero_is_a_domain_error():
    with pytest.raises(ExpressionDomainError):
        parse_expression("1 / x[S]").evaluate({"S": 0})
    with pytest.raises(ExpressionDomainError):
        parse_expression("x[S]^-2").evaluate({"S": 0})


@pytest.mark.parametrize(
    "text, column",
    [("1 + ", 5), ("x[S] $ 2", 6), ("(1 + 2", 7), ("2 ^ x[S]", 5), ("1 2", 3)],
)
def test_syntax_errors_report_columns(text, column):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression(text)
    assert info.value.column == column
    assert info.value.expected


def test_falling_factorial_matches_binomial():
    term = falling_factorial_term("S", 3)
    for n in range(8):
        assert term.evaluate({"S": n}) == Fraction(n * (n - 1) * (n - 2), 6)


def test_substitution():
    e = parse_expression("x[A] * x[B]").substitute({"B": parse_expression("x[A] + 2")})
    assert e.species() == {"A"}
    assert e.evaluate({"A": 3}) == 15


def test_compile_numpy_agrees_with_exact():
    e = parse_expression("x[M] * 2 * x[P]^2 / (10 + x[P]^2)")
    f = compile_numpy(e, {"M": 0, "P": 1})
    X = np.array([[1, 0], [2, 3], [5, 7]], dtype=float)
    exact = [float(e.evaluate({"M": int(m), "P": int(p)})) for m, p in X]
    assert np.allclose(f(X), exact, rtol=1e-14, atol=0)


names = st.sampled_from(["A", "B", "S1"])
leaves = st.one_of(
    st.fractions(min_value=-5, max_value=5, max_denominator=4).map(Const),
    names.map(Var),
)


def trees(depth=3):
    return st.recursive(
        leaves,
        lambda sub: st.one_of(
            st.tuples(st.sampled_from("+-*"), sub, sub).map(lambda t: BinOp(*t)),
            sub.map(Neg),
            st.tuples(sub, st.integers(0, 3)).map(lambda t: Pow(*t)),
        ),
        max_leaves=8,
    )


@settings(max_examples=200, deadline=None)
@given(trees(), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4))
def test_print_parse_round_trip_preserves_value(tree, a, b, s):
    counts = {"A": a, "B": b, "S1": s}
    again = parse_expression(tree.to_text())
    assert again.evaluate(counts) == tree.evaluate(counts)
    assert parse_expression(again.to_text()).to_text() == again.to_text()
