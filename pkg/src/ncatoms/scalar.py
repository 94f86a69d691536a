"""Exact Gaussian rationals ``a + b*i`` with ``a, b`` in Q."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Union

ScalarLike = Union["Scalar", int, Fraction, str]


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


@dataclass(frozen=True, slots=True)
class Scalar:
    """Exact complex number with rational real and imaginary parts.

    Equality and hashing are structural on the reduced fractions, so two
    scalars compare equal exactly when they denote the same number.
    """

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "re", _frac(self.re))
        object.__setattr__(self, "im", _frac(self.im))

    @classmethod
    def coerce(cls, x: ScalarLike) -> "Scalar":
        if isinstance(x, Scalar):
            return x
        if isinstance(x, str):
            return cls.parse(x)
        if isinstance(x, complex):
            raise TypeError("floating complex values are not exact; pass a Scalar or string")
        return cls(_frac(x))

    @classmethod
    def parse(cls, text: str) -> "Scalar":
        """Parse a constant written in expression syntax, e.g. ``"1/2"``, ``"2-3*i"``."""
        from .ncexpr import Const
        from .parser import parse_expression

        expr = parse_expression(text, [])
        if not isinstance(expr, Const):
            from .errors import ExpressionSyntaxError

            raise ExpressionSyntaxError(f"not a constant: {text!r}")
        return expr.value

    # arithmetic
    def __add__(self, other):
        o = _maybe(other)
        if o is None:
            return NotImplemented
        return Scalar(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return Scalar(-self.re, -self.im)

    def __sub__(self, other):
        o = _maybe(other)
        if o is None:
            return NotImplemented
        return Scalar(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = _maybe(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = _maybe(other)
        if o is None:
            return NotImplemented
        return Scalar(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def inverse(self) -> "Scalar":
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ZeroDivisionError("inverse of zero scalar")
        return Scalar(self.re / n, -self.im / n)

    def __truediv__(self, other):
        o = _maybe(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = _maybe(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        base = self if k >= 0 else self.inverse()
        out = ONE
        for _ in range(abs(k)):
            out = out * base
        return out

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        o = _maybe(other)
        if o is None:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def conjugate(self) -> "Scalar":
        return Scalar(self.re, -self.im)

    @property
    def is_real(self) -> bool:
        return self.im == 0

    def sort_key(self):
        return (self.re, self.im)

    def __lt__(self, other: "Scalar"):
        return self.sort_key() < other.sort_key()

    def to_complex(self) -> complex:
        return complex(float(self.re), float(self.im))

    def denominators(self) -> tuple[int, int]:
        return self.re.denominator, self.im.denominator

    def __str__(self) -> str:
        # valid input for Scalar.parse / the expression parser
        if self.im == 0:
            return str(self.re)
        if self.im == 1:
            im = "i"
        elif self.im == -1:
            im = "-i"
        else:
            im = f"{self.im}*i"
        if self.re == 0:
            return im
        sign = "" if im.startswith("-") else "+"
        return f"{self.re}{sign}{im}"

    def __repr__(self) -> str:
        return f"Scalar({str(self)!r})"

    def to_json(self) -> dict:
        return {"re": str(self.re), "im": str(self.im)}

    @classmethod
    def from_json(cls, obj) -> "Scalar":
        if isinstance(obj, (str, int)):
            return cls.coerce(obj)
        return cls(_frac(str(obj.get("re", "0"))), _frac(str(obj.get("im", "0"))))


def _maybe(x) -> Scalar | None:
    if isinstance(x, Scalar):
        return x
    if isinstance(x, (int, Fraction)):
        return Scalar(Fraction(x))
    return None


ZERO = Scalar(0)
ONE = Scalar(1)
I = Scalar(0, 1)
