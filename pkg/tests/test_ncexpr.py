from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncatoms.errors import ExpressionSyntaxError, NotAPolynomial, SingularSubexpression, UnknownVariable
from ncatoms.exactla import FpiField, QiMatrix, random_invertible, random_matrix
from ncatoms.ncexpr import (
    Const,
    Inv,
    Prod,
    Sum,
    Var,
    evaluate_commutative,
    evaluate_matrix,
    expand_polynomial,
    formal_adjoint,
    from_json,
    is_selfadjoint,
    print_expression,
    size,
    to_json,
)
from ncatoms.parser import fold, parse_expression
from ncatoms.scalar import ONE, Scalar

X1, X2 = Var(1), Var(2)
MINUS = Const(-ONE)


def test_commutator_tree():
    e = parse_expression("x1*x2 - x2*x1", ["x1", "x2"])
    assert e == Sum(Prod(X1, X2), Prod(MINUS, Prod(X2, X1)))


def test_inverse_tree():
    assert parse_expression("(x1 + x2)^-1") == Inv(Sum(X1, X2))


def test_rational_expression_tree():
    e = parse_expression("x1*x2^-2*x1 + x2*x1^-2*x2")
    sq2 = Inv(Prod(X2, X2))
    sq1 = Inv(Prod(X1, X1))
    assert e == Sum(Prod(Prod(X1, sq2), X1), Prod(Prod(X2, sq1), X2))


def test_precedence_and_unary_minus():
    assert parse_expression("-x1 + x2") == Sum(Prod(MINUS, X1), X2)
    assert parse_expression("x1^2") == Prod(X1, X1)
    assert parse_expression("x1^0") == Const(ONE)
    assert parse_expression("2*3 + x1") == Sum(Const(Scalar(6)), X1)


def test_user_names():
    assert parse_expression("a*b", ["a", "b"]) == Prod(X1, X2)
    with pytest.raises(UnknownVariable):
        parse_expression("a*c", ["a", "b"])


@pytest.mark.parametrize("text,pos", [("x1*", 3), ("(x1 + x2", 8), ("x1 $ x2", 3), ("x1^x2", 3)])
def test_syntax_errors_carry_position(text, pos):
    with pytest.raises(ExpressionSyntaxError) as info:
        parse_expression(text)
    assert info.value.position == pos


def test_commutative_examples():
    assert evaluate_commutative(parse_expression("x1+x2"), [1, 2]) == Scalar(3)
    assert evaluate_commutative(parse_expression("x1^-1"), [0]) is None
    r1 = parse_expression("x1*x2^-2*x1 + x2*x1^-2*x2")
    for lam, rho in [(1, 1), (2, 1), (Fraction(1, 3), 5)]:
        lam, rho = Fraction(lam), Fraction(rho)
        assert evaluate_commutative(r1, [lam, rho]) == Scalar(rho**2 / lam**2 + lam**2 / rho**2)


def test_adjoint_examples():
    assert formal_adjoint(Prod(X1, X2)) == Prod(X2, X1)
    assert formal_adjoint(Const(Scalar(2, 3))) == Const(Scalar(2, -3))
    assert is_selfadjoint(parse_expression("i*(x1*x2 - x2*x1)"))
    assert not is_selfadjoint(parse_expression("x1*x2 - x2*x1"))
    assert is_selfadjoint(parse_expression("(x1*x2*x1 + 1)^-1"))


def test_expand_polynomial():
    nf = expand_polynomial(parse_expression("(x1 + x2)^2 - x1*x2"))
    assert nf == {(1, 1): ONE, (2, 1): ONE, (2, 2): ONE}
    with pytest.raises(NotAPolynomial):
        expand_polynomial(parse_expression("x1^-1"))


def test_matrix_examples():
    f = FpiField()
    rng = np.random.default_rng(0)
    M, _, _ = random_invertible(4, rng, f)
    assert evaluate_matrix(X1, [M]) == M
    assert evaluate_matrix(parse_expression("x1*x1^-1"), [M]) == M.identity_like()


def test_commutator_of_diagonal_and_rotated():
    # X2 has eigenvalues r1, r2 in the rotated basis (1, 1), (1, -1)
    r1, r2 = Fraction(5), Fraction(2)
    X1m = QiMatrix.diag([1, 0])
    half = Fraction(1, 2)
    X2m = QiMatrix([[half * (r1 + r2), half * (r1 - r2)], [half * (r1 - r2), half * (r1 + r2)]])
    got = evaluate_matrix(parse_expression("x1*x2 - x2*x1"), [X1m, X2m])
    assert got == QiMatrix([[0, half * (r1 - r2)], [-half * (r1 - r2), 0]])


def test_singular_inverse_names_node():
    f = FpiField()
    Z = random_matrix(3, np.random.default_rng(1), f).scale(Scalar(0))
    e = parse_expression("x2 + x1^-1")
    with pytest.raises(SingularSubexpression) as info:
        evaluate_matrix(e, [Z, Z])
    assert info.value.node == Inv(X1)


def test_float_backend_threshold():
    with pytest.raises(SingularSubexpression):
        evaluate_matrix(Inv(X1), [np.diag([1.0, 1e-14])])


# ---------------------------------------------------------------------------
# generated expressions

leaves = st.one_of(
    st.integers(1, 3).map(Var),
    st.builds(lambda a, b: Const(Scalar(a, b)), st.fractions(max_denominator=6).filter(lambda q: abs(q) < 20),
              st.sampled_from([0, 0, 1, -1])),
)
exprs = st.recursive(
    leaves,
    lambda ch: st.one_of(st.builds(Sum, ch, ch), st.builds(Prod, ch, ch), st.builds(Inv, ch)),
    max_leaves=12,
)


@given(exprs)
def test_print_parse_round_trip(e):
    e = fold(e)
    assert parse_expression(print_expression(e)) == e


@given(exprs)
def test_json_round_trip(e):
    assert from_json(to_json(e)) == e


@given(exprs)
def test_adjoint_involution(e):
    assert formal_adjoint(formal_adjoint(e)) == e
    assert size(formal_adjoint(e)) == size(e)


@settings(max_examples=40, deadline=None)
@given(exprs, st.integers(0, 10**6))
def test_one_by_one_matches_commutative(e, seed):
    rng = np.random.default_rng(seed)
    pt = [Scalar(int(rng.integers(-5, 6)), int(rng.integers(-5, 6))) for _ in range(3)]
    expected = evaluate_commutative(e, pt)
    mats = [QiMatrix([[p]]) for p in pt]
    try:
        got = evaluate_matrix(e, mats)
    except SingularSubexpression:
        assert expected is None
        return
    assert expected is not None and got == QiMatrix([[expected]])


@settings(max_examples=30, deadline=None)
@given(exprs, st.integers(0, 10**6))
def test_selfadjoint_gives_hermitian(e, seed):
    e = Sum(e, formal_adjoint(e))
    rng = np.random.default_rng(seed)
    mats = []
    for _ in range(3):
        a = [[Scalar(int(rng.integers(-3, 4)), int(rng.integers(-3, 4))) for _ in range(2)] for _ in range(2)]
        A = QiMatrix(a)
        mats.append(A + A.conjugate_transpose())
    try:
        got = evaluate_matrix(e, mats)
    except SingularSubexpression:
        return
    assert got == got.conjugate_transpose()
