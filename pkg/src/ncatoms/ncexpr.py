"""Noncommutative rational expressions.

Expressions are immutable trees of five node kinds (constants, variables,
binary sums, binary products and inverses).  They are formal objects:
``x1 + (-1)*x1`` and ``0`` are different trees, and no evaluation ever
rewrites one into the other.

Variables are 1-based indices; display names live outside the tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Sequence, Union

import numpy as np

from .errors import NotAPolynomial, SingularMatrix, SingularSubexpression
from .scalar import ONE, ZERO, Scalar

# condition number above which a floating inverse counts as singular
FLOAT_SINGULAR_COND = 1e12


class Expr:
    """Base class; supports ``+ - * **`` and :meth:`inv` for building trees."""

    __slots__ = ()

    def __add__(self, other):
        return Sum(self, as_expr(other))

    def __radd__(self, other):
        return Sum(as_expr(other), self)

    def __sub__(self, other):
        return Sum(self, Prod(Const(-ONE), as_expr(other)))

    def __rsub__(self, other):
        return Sum(as_expr(other), Prod(Const(-ONE), self))

    def __mul__(self, other):
        return Prod(self, as_expr(other))

    def __rmul__(self, other):
        return Prod(as_expr(other), self)

    def __neg__(self):
        return Prod(Const(-ONE), self)

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k == 0:
            return Const(ONE)
        base = self
        for _ in range(abs(k) - 1):
            base = Prod(base, self)
        return Inv(base) if k < 0 else base

    def inv(self) -> "Inv":
        return Inv(self)

    def __str__(self):
        return print_expression(self)


@dataclass(frozen=True, eq=True, repr=False)
class Const(Expr):
    value: Scalar

    def __post_init__(self):
        object.__setattr__(self, "value", Scalar.coerce(self.value))

    def __repr__(self):
        return f"Const({self.value})"


@dataclass(frozen=True, eq=True, repr=False)
class Var(Expr):
    index: int

    def __post_init__(self):
        if not isinstance(self.index, int) or self.index < 1:
            raise ValueError("variable index must be a positive integer")

    def __repr__(self):
        return f"V{self.index}"


@dataclass(frozen=True, eq=True, repr=False)
class Sum(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Sum({self.left!r}, {self.right!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Prod(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"Prod({self.left!r}, {self.right!r})"


@dataclass(frozen=True, eq=True, repr=False)
class Inv(Expr):
    arg: Expr

    def __repr__(self):
        return f"Inv({self.arg!r})"


RationalExpression = Expr
ExprLike = Union[Expr, Scalar, int, Fraction]


def as_expr(x: ExprLike) -> Expr:
    if isinstance(x, Expr):
        return x
    return Const(Scalar.coerce(x))


def variables(n: int) -> tuple[Var, ...]:
    """Convenience: ``x1, x2 = variables(2)``."""
    return tuple(Var(k) for k in range(1, n + 1))


def walk(expr: Expr) -> Iterator[Expr]:
    stack = [expr]
    while stack:
        e = stack.pop()
        yield e
        if isinstance(e, (Sum, Prod)):
            stack.append(e.right)
            stack.append(e.left)
        elif isinstance(e, Inv):
            stack.append(e.arg)


def max_variable(expr: Expr) -> int:
    return max((e.index for e in walk(expr) if isinstance(e, Var)), default=0)


def has_inverse(expr: Expr) -> bool:
    return any(isinstance(e, Inv) for e in walk(expr))


def size(expr: Expr) -> int:
    return sum(1 for _ in walk(expr))


# ---------------------------------------------------------------------------
# printing and JSON

_PREC_SUM, _PREC_PROD, _PREC_POSTFIX, _PREC_ATOM = 1, 2, 3, 4


def _names(names: Sequence[str] | None, k: int) -> str:
    if names is None:
        return f"x{k}"
    if k > len(names):
        raise IndexError(f"no name for variable {k}")
    return names[k - 1]


def print_expression(expr: Expr, names: Sequence[str] | None = None) -> str:
    """Render ``expr`` so that the parser reads back the same tree."""

    def prec(e: Expr) -> int:
        if isinstance(e, Sum):
            return _PREC_SUM
        if isinstance(e, Prod):
            return _PREC_PROD
        if isinstance(e, Inv):
            return _PREC_POSTFIX
        return _PREC_ATOM

    def go(e: Expr, need: int) -> str:
        if isinstance(e, Const):
            v = e.value
            if v.is_real and v.re >= 0 and v.re.denominator == 1:
                s = str(v)
            elif v == Scalar(0, 1):
                s = "i"
            else:
                s = f"({v})"
            return s
        if isinstance(e, Var):
            return _names(names, e.index)
        if isinstance(e, Sum):
            s = f"{go(e.left, _PREC_SUM)} + {go(e.right, _PREC_PROD)}"
        elif isinstance(e, Prod):
            s = f"{go(e.left, _PREC_PROD)}*{go(e.right, _PREC_POSTFIX)}"
        elif isinstance(e, Inv):
            s = f"{go(e.arg, _PREC_ATOM)}^-1"
        else:
            raise TypeError(f"not an expression: {e!r}")
        return f"({s})" if prec(e) < need else s

    return go(expr, _PREC_SUM)


def to_json(expr: Expr) -> dict:
    if isinstance(expr, Const):
        return {"op": "const", **expr.value.to_json()}
    if isinstance(expr, Var):
        return {"op": "var", "index": expr.index}
    if isinstance(expr, Sum):
        return {"op": "sum", "left": to_json(expr.left), "right": to_json(expr.right)}
    if isinstance(expr, Prod):
        return {"op": "prod", "left": to_json(expr.left), "right": to_json(expr.right)}
    if isinstance(expr, Inv):
        return {"op": "inv", "arg": to_json(expr.arg)}
    raise TypeError(f"not an expression: {expr!r}")


def from_json(obj: Mapping, names: Sequence[str] | None = None) -> Expr:
    """Inverse of :func:`to_json`; variables may be given by ``index`` or ``name``."""
    from .errors import ExpressionSyntaxError, UnknownVariable

    op = obj.get("op")
    if op == "const":
        return Const(Scalar.from_json(obj))
    if op == "var":
        if "index" in obj:
            return Var(int(obj["index"]))
        name = obj.get("name")
        if names is None or name not in names:
            raise UnknownVariable(f"unknown variable {name!r}")
        return Var(list(names).index(name) + 1)
    if op in ("sum", "prod"):
        cls = Sum if op == "sum" else Prod
        return cls(from_json(obj["left"], names), from_json(obj["right"], names))
    if op == "inv":
        return Inv(from_json(obj["arg"], names))
    raise ExpressionSyntaxError(f"unknown op {op!r} in JSON expression")


# ---------------------------------------------------------------------------
# adjoint and normal forms


def formal_adjoint(expr: Expr) -> Expr:
    """Conjugate constants, reverse products; variables are fixed."""
    if isinstance(expr, Const):
        return Const(expr.value.conjugate())
    if isinstance(expr, Var):
        return expr
    if isinstance(expr, Sum):
        return Sum(formal_adjoint(expr.left), formal_adjoint(expr.right))
    if isinstance(expr, Prod):
        return Prod(formal_adjoint(expr.right), formal_adjoint(expr.left))
    if isinstance(expr, Inv):
        return Inv(formal_adjoint(expr.arg))
    raise TypeError(f"not an expression: {expr!r}")


# A normal form maps words to nonzero coefficients.  Letters are variable
# indices (int) or ("inv", key) where key is the frozen normal form of the
# inverted subexpression.
NormalForm = dict


def _freeze(nf: NormalForm) -> tuple:
    return tuple(sorted(((w, (c.re, c.im)) for w, c in nf.items()), key=repr))


def _nf_add(a: NormalForm, b: NormalForm) -> NormalForm:
    out = dict(a)
    for w, c in b.items():
        s = out.get(w, ZERO) + c
        if s:
            out[w] = s
        else:
            out.pop(w, None)
    return out


def _nf_mul(a: NormalForm, b: NormalForm) -> NormalForm:
    out: NormalForm = {}
    for w1, c1 in a.items():
        for w2, c2 in b.items():
            w = w1 + w2
            s = out.get(w, ZERO) + c1 * c2
            if s:
                out[w] = s
            else:
                out.pop(w, None)
    return out


def normal_form(expr: Expr) -> NormalForm:
    """Expand into a sum of monomials; inverse subtrees become opaque letters.

    Inverses of nonzero constants are folded into coefficients.  This is a
    syntactic normalization only; it decides no identities of the free field.
    """
    if isinstance(expr, Const):
        return {(): expr.value} if expr.value else {}
    if isinstance(expr, Var):
        return {(expr.index,): ONE}
    if isinstance(expr, Sum):
        return _nf_add(normal_form(expr.left), normal_form(expr.right))
    if isinstance(expr, Prod):
        return _nf_mul(normal_form(expr.left), normal_form(expr.right))
    if isinstance(expr, Inv):
        inner = normal_form(expr.arg)
        if len(inner) == 1 and () in inner:
            return {(): inner[()].inverse()}
        return {(("inv", _freeze(inner)),): ONE}
    raise TypeError(f"not an expression: {expr!r}")


def is_selfadjoint(expr: Expr) -> bool:
    return normal_form(expr) == normal_form(formal_adjoint(expr))


def expand_polynomial(expr: Expr) -> dict[tuple[int, ...], Scalar]:
    """Monomial expansion of a polynomial expression.

    Raises :class:`NotAPolynomial` if an inverse of a nonconstant survives.
    """
    nf = normal_form(expr)
    for w in nf:
        if any(not isinstance(letter, int) for letter in w):
            raise NotAPolynomial("expression contains the inverse of a nonconstant")
    return nf


def polynomial_from_terms(terms: Mapping[tuple[int, ...], ExprLike]) -> Expr:
    """Build an expression from a monomial -> coefficient mapping."""
    out: Expr | None = None
    for word, coeff in terms.items():
        c = Scalar.coerce(coeff)
        e: Expr = Const(c)
        for k in word:
            e = Prod(e, Var(k))
        out = e if out is None else Sum(out, e)
    return out if out is not None else Const(ZERO)


# ---------------------------------------------------------------------------
# evaluation


def evaluate_commutative(expr: Expr, point: Sequence) -> Scalar | None:
    """Evaluate with commuting scalar variables; ``None`` marks a pole."""
    pt = [Scalar.coerce(x) for x in point]
    memo: dict[int, Scalar | None] = {}

    def go(e: Expr):
        key = id(e)
        if key in memo:
            return memo[key]
        if isinstance(e, Const):
            r = e.value
        elif isinstance(e, Var):
            if e.index > len(pt):
                raise IndexError(f"point has {len(pt)} coordinates, expression uses x{e.index}")
            r = pt[e.index - 1]
        elif isinstance(e, (Sum, Prod)):
            a, b = go(e.left), go(e.right)
            r = None if a is None or b is None else (a + b if isinstance(e, Sum) else a * b)
        elif isinstance(e, Inv):
            a = go(e.arg)
            r = None if a is None or not a else a.inverse()
        else:
            raise TypeError(f"not an expression: {e!r}")
        memo[key] = r
        return r

    return go(expr)


class _FloatOps:
    """Adapter giving numpy complex arrays the matrix protocol used below."""

    @staticmethod
    def identity(M):
        return np.eye(M.shape[0], dtype=complex)

    @staticmethod
    def scale(M, s: Scalar):
        return M * s.to_complex()

    @staticmethod
    def inverse(M):
        if np.linalg.cond(M) > FLOAT_SINGULAR_COND:
            raise SingularMatrix("numerically singular")
        return np.linalg.inv(M)


class _ExactOps:
    @staticmethod
    def identity(M):
        return M.identity_like()

    @staticmethod
    def scale(M, s: Scalar):
        return M.scale(s)

    @staticmethod
    def inverse(M):
        return M.inverse()


def evaluate_matrix(expr: Expr, assignment: Mapping[int, object] | Sequence) -> object:
    """Evaluate ``expr`` at square matrices of a common size.

    ``assignment`` maps variable index -> matrix, or is a sequence whose
    k-th entry is the matrix for ``x_{k+1}``.  Works for :class:`FpiMatrix`,
    :class:`QiMatrix` and numpy complex arrays.  A singular argument of an
    inverse raises :class:`SingularSubexpression` carrying that node.
    """
    if isinstance(assignment, Mapping):
        lookup: Callable[[int], object] = assignment.__getitem__
        sample = next(iter(assignment.values()))
    else:
        seq = list(assignment)
        lookup = lambda k: seq[k - 1]  # noqa: E731
        sample = seq[0]
    ops = _FloatOps if isinstance(sample, np.ndarray) else _ExactOps
    shape = sample.shape
    if shape[0] != shape[1]:
        raise ValueError("assigned matrices must be square")
    memo: dict[int, object] = {}
    eye = ops.identity(sample)

    def go(e: Expr):
        key = id(e)
        if key in memo:
            return memo[key]
        if isinstance(e, Const):
            r = ops.scale(eye, e.value)
        elif isinstance(e, Var):
            r = lookup(e.index)
            if r.shape != shape:
                raise ValueError("assigned matrices must share one size")
        elif isinstance(e, Sum):
            r = go(e.left) + go(e.right)
        elif isinstance(e, Prod):
            left = e.left
            if isinstance(left, Const):
                r = ops.scale(go(e.right), left.value)
            elif isinstance(e.right, Const):
                r = ops.scale(go(left), e.right.value)
            else:
                r = go(left) @ go(e.right)
        elif isinstance(e, Inv):
            try:
                r = ops.inverse(go(e.arg))
            except SingularMatrix:
                raise SingularSubexpression(e) from None
        else:
            raise TypeError(f"not an expression: {e!r}")
        memo[key] = r
        return r

    return go(expr)
