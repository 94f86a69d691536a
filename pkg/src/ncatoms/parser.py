"""Text syntax for rational expressions.

Grammar (whitespace is ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary ("*" unary)*
    unary   := "-" unary | postfix
    postfix := atom ("^" ["-"] INT)*
    atom    := NUMBER | "i" | NAME | "(" expr ")"
    NUMBER  := INT | INT "/" INT

``a - b`` becomes ``a + (-1)*b`` and ``-a`` becomes ``(-1)*a``.  ``a^k`` is
the left-associated product of ``k`` copies, ``a^0`` is ``1`` and ``a^-k`` is
the inverse of ``a^k``.  Subtrees made only of constants are folded into a
single constant while parsing (an inverse of the constant zero is kept).
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Sequence

from .errors import ExpressionSyntaxError, UnknownVariable
from .ncexpr import Const, Expr, Inv, Prod, Sum, Var
from .scalar import ONE, Scalar

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\s*/\s*\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*^()]))"
)
_DEFAULT_NAME = re.compile(r"x([1-9][0-9]*)$")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionSyntaxError(f"unexpected character {text[bad]!r}", bad, text)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", n))
    return out


def fold(expr: Expr) -> Expr:
    """Replace constant-only subtrees by single constants (bottom-up)."""
    if isinstance(expr, (Sum, Prod)):
        a, b = fold(expr.left), fold(expr.right)
        return _combine(type(expr), a, b)
    if isinstance(expr, Inv):
        return _invert(fold(expr.arg))
    return expr


def _combine(cls, a: Expr, b: Expr) -> Expr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value if cls is Sum else a.value * b.value)
    return cls(a, b)


def _invert(a: Expr) -> Expr:
    if isinstance(a, Const) and a.value:
        return Const(a.value.inverse())
    return Inv(a)


class _Parser:
    def __init__(self, text: str, names: Sequence[str]):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.names = list(names)
        if len(set(self.names)) != len(self.names):
            raise ValueError("variable names must be distinct")
        if "i" in self.names:
            raise ValueError("'i' is reserved for the imaginary unit")
        self.index = {nm: k + 1 for k, nm in enumerate(self.names)}

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        kind, val, pos = self.take()
        if val != value or kind != "op":
            shown = "end of input" if kind == "end" else repr(val)
            raise ExpressionSyntaxError(f"expected {value!r}, found {shown}", pos, self.text)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {val!r}", pos, self.text)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.take()
                rhs = self.term()
                if val == "-":
                    rhs = _combine(Prod, Const(-ONE), rhs)
                e = _combine(Sum, e, rhs)
            else:
                return e

    def term(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.take()
                e = _combine(Prod, e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.take()
            return _combine(Prod, Const(-ONE), self.unary())
        return self.postfix()

    def postfix(self) -> Expr:
        e = self.atom()
        while True:
            kind, val, _ = self.peek()
            if not (kind == "op" and val == "^"):
                return e
            self.take()
            neg = False
            kind, val, pos = self.peek()
            if kind == "op" and val == "-":
                neg = True
                self.take()
                kind, val, pos = self.peek()
            if kind != "num" or "/" in val:
                raise ExpressionSyntaxError("exponent must be an integer", pos, self.text)
            self.take()
            e = _power(e, int(val), neg)

    def atom(self) -> Expr:
        kind, val, pos = self.take()
        if kind == "num":
            if "/" in val:
                p, q = (s.strip() for s in val.split("/"))
                if int(q) == 0:
                    raise ExpressionSyntaxError("zero denominator in literal", pos, self.text)
                return Const(Scalar(Fraction(int(p), int(q))))
            return Const(Scalar(int(val)))
        if kind == "name":
            if val == "i":
                return Const(Scalar(0, 1))
            if val in self.index:
                return Var(self.index[val])
            if not self.names:
                m = _DEFAULT_NAME.match(val)
                if m:
                    return Var(int(m.group(1)))
            raise UnknownVariable(f"unknown variable {val!r}", pos, self.text)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        shown = "end of input" if kind == "end" else repr(val)
        raise ExpressionSyntaxError(f"unexpected {shown}", pos, self.text)


def _power(base: Expr, k: int, negative: bool) -> Expr:
    if k == 0:
        return Const(ONE)
    e = base
    for _ in range(k - 1):
        e = _combine(Prod, e, base)
    return _invert(e) if negative else e


def parse_expression(text: str, variable_names: Sequence[str] | None = None) -> Expr:
    """Parse ``text`` into an expression tree.

    Args:
        text: expression source, e.g. ``"(x1 + x2)^-1*x1"``.
        variable_names: names bound to ``x1, x2, ...`` in order.  When empty
            or ``None``, the names ``x1, x2, ...`` themselves are accepted.

    Raises:
        ExpressionSyntaxError: malformed input; ``position`` points at the
            offending character.
        UnknownVariable: a name that is neither bound nor ``i``.
    """
    return _Parser(text, variable_names or []).parse()
