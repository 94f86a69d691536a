"""Formal linear representations ``R = -u Q^{-1} v`` with affine-linear Q.

A representation of dimension m consists of a constant row ``u``, a
constant column ``v`` and coefficient matrices ``Q_0, Q_1, ..., Q_D`` such
that ``Q(X) = Q_0 (x) I + sum_j Q_j (x) X_j``.  The bordered matrix
``L = [[0, u], [v, Q]]`` (the display) satisfies, whenever ``Q(X)`` is
invertible,

    rank L(X) = rank R(X) + (size of X) * m,

which turns rank questions about rational expressions into rank questions
about linear pencils.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import InsufficientSamples, SingularMatrix, SingularSubexpression
from .exactla import FpiField, FpiMatrix, random_matrix
from .ncexpr import Const, Expr, Inv, Prod, Sum, Var, evaluate_matrix, max_variable
from .scalar import ONE, ZERO, Scalar


def _zeros(r: int, c: int) -> np.ndarray:
    out = np.empty((r, c), dtype=object)
    out.fill(ZERO)
    return out


def _as_rows(a: np.ndarray) -> tuple[tuple[Scalar, ...], ...]:
    return tuple(tuple(row) for row in a)


@dataclass(frozen=True)
class AffineMatrix:
    """Square affine-linear matrix ``C_0 + sum_j C_j x_j`` with Scalar coefficients.

    ``coeffs`` maps 0 to the constant part and ``j >= 1`` to the coefficient
    of variable ``x_j``; absent keys are zero.
    """

    size: int
    coeffs: Mapping[int, np.ndarray]

    def coefficient(self, key: int) -> np.ndarray:
        c = self.coeffs.get(key)
        return _zeros(self.size, self.size) if c is None else c

    def keys(self) -> list[int]:
        return sorted(self.coeffs)

    def evaluate(self, assignment: Mapping[int, FpiMatrix] | Sequence[FpiMatrix], field: FpiField) -> FpiMatrix:
        """``C_0 (x) I + sum_j C_j (x) X_j`` as one exact matrix."""
        lookup = assignment.__getitem__ if isinstance(assignment, Mapping) else (lambda k: assignment[k - 1])
        size = None
        for k in self.keys():
            if k:
                size = lookup(k).rows
                break
        if size is None:
            first = assignment[next(iter(assignment))] if isinstance(assignment, Mapping) else assignment[0]
            size = first.rows
        eye = FpiMatrix.identity(size, field)
        total = None
        for k in self.keys():
            X = eye if k == 0 else lookup(k)
            term = X.kron_left(_as_rows(self.coeffs[k]))
            total = term if total is None else total + term
        if total is None:
            return FpiMatrix.zeros(self.size * size, self.size * size, field)
        return total


@dataclass(frozen=True)
class FormalLinearRep:
    """Triple ``(u, Q, v)``; ``u`` is 1 x dim, ``v`` is dim x 1, both constant."""

    dim: int
    u: tuple[Scalar, ...]
    v: tuple[Scalar, ...]
    Q: AffineMatrix

    def __post_init__(self):
        if len(self.u) != self.dim or len(self.v) != self.dim or self.Q.size != self.dim:
            raise ValueError("representation parts have inconsistent dimensions")

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "u": [str(s) for s in self.u],
            "v": [str(s) for s in self.v],
            "Q": {str(k): [[str(s) for s in row] for row in self.Q.coeffs[k]] for k in self.Q.keys()},
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "FormalLinearRep":
        dim = int(obj["dim"])
        coeffs = {}
        for k, rows in obj["Q"].items():
            a = _zeros(dim, dim)
            for i, row in enumerate(rows):
                for j, s in enumerate(row):
                    a[i, j] = Scalar.coerce(s)
            coeffs[int(k)] = a
        return cls(
            dim,
            tuple(Scalar.coerce(s) for s in obj["u"]),
            tuple(Scalar.coerce(s) for s in obj["v"]),
            AffineMatrix(dim, coeffs),
        )


def _atom(value: Scalar | None, var: int | None) -> FormalLinearRep:
    c0 = _zeros(2, 2)
    c0[0, 1] = c0[1, 0] = -ONE
    coeffs = {0: c0}
    if var is None:
        c0[0, 0] = value
    else:
        cv = _zeros(2, 2)
        cv[0, 0] = ONE
        coeffs[var] = cv
    return FormalLinearRep(2, (ZERO, ONE), (ZERO, ONE), AffineMatrix(2, coeffs))


def _sum(a: FormalLinearRep, b: FormalLinearRep) -> FormalLinearRep:
    m = a.dim + b.dim
    coeffs = {}
    for k in sorted(set(a.Q.coeffs) | set(b.Q.coeffs)):
        c = _zeros(m, m)
        c[: a.dim, : a.dim] = a.Q.coefficient(k)
        c[a.dim :, a.dim :] = b.Q.coefficient(k)
        coeffs[k] = c
    return FormalLinearRep(m, a.u + b.u, a.v + b.v, AffineMatrix(m, coeffs))


def _prod(a: FormalLinearRep, b: FormalLinearRep) -> FormalLinearRep:
    m = a.dim + b.dim
    coeffs = {}
    for k in sorted(set(a.Q.coeffs) | set(b.Q.coeffs) | {0}):
        c = _zeros(m, m)
        c[: a.dim, : a.dim] = a.Q.coefficient(k)
        c[a.dim :, a.dim :] = b.Q.coefficient(k)
        if k == 0:
            # coupling block v1 * u2
            c[: a.dim, a.dim :] = np.outer(np.array(a.v, dtype=object), np.array(b.u, dtype=object))
        coeffs[k] = c
    u = a.u + (ZERO,) * b.dim
    v = (ZERO,) * a.dim + b.v
    return FormalLinearRep(m, u, v, AffineMatrix(m, coeffs))


def _inverse(a: FormalLinearRep) -> FormalLinearRep:
    m = a.dim + 1
    coeffs = {}
    for k in sorted(set(a.Q.coeffs) | {0}):
        c = _zeros(m, m)
        c[1:, 1:] = a.Q.coefficient(k)
        if k == 0:
            c[0, 1:] = a.u
            c[1:, 0] = a.v
        coeffs[k] = c
    u = (ONE,) + (ZERO,) * a.dim
    v = (-ONE,) + (ZERO,) * a.dim
    return FormalLinearRep(m, u, v, AffineMatrix(m, coeffs))


def linearize(expr: Expr) -> FormalLinearRep:
    """Build a representation by structural recursion on ``expr``.

    Dimensions: 2 for constants and variables, additive for sums and
    products, plus one for an inverse.  Shared subtrees are linearized once.
    """
    memo: dict[int, FormalLinearRep] = {}

    def go(e: Expr) -> FormalLinearRep:
        key = id(e)
        if key in memo:
            return memo[key]
        if isinstance(e, Const):
            r = _atom(e.value, None)
        elif isinstance(e, Var):
            r = _atom(None, e.index)
        elif isinstance(e, Sum):
            r = _sum(go(e.left), go(e.right))
        elif isinstance(e, Prod):
            r = _prod(go(e.left), go(e.right))
        elif isinstance(e, Inv):
            r = _inverse(go(e.arg))
        else:
            raise TypeError(f"not an expression: {e!r}")
        memo[key] = r
        return r

    return go(expr)


def display(rep: FormalLinearRep) -> AffineMatrix:
    """The bordered affine matrix ``[[0, u], [v, Q]]`` of size ``dim + 1``."""
    m = rep.dim + 1
    coeffs = {}
    for k in sorted(set(rep.Q.coeffs) | {0}):
        c = _zeros(m, m)
        c[1:, 1:] = rep.Q.coefficient(k)
        if k == 0:
            c[0, 1:] = rep.u
            c[1:, 0] = rep.v
        coeffs[k] = c
    return AffineMatrix(m, coeffs)


def represented_value(rep: FormalLinearRep, assignment, field: FpiField) -> FpiMatrix:
    """``-u Q(X)^{-1} v``; raises :class:`SingularMatrix` if Q(X) is singular."""
    QX = rep.Q.evaluate(assignment, field)
    s = QX.rows // rep.dim
    Qinv = QX.inverse()
    eye = FpiMatrix.identity(s, field)
    U = eye.kron_left([list(rep.u)])
    V = eye.kron_left([[x] for x in rep.v])
    return -(U @ Qinv @ V)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    samples: int
    defined: int
    failures: tuple[str, ...] = ()


def validate_rep_report(
    rep: FormalLinearRep,
    expr: Expr,
    trials: int = 5,
    m_test: int = 3,
    seed: int = 0,
    field: FpiField | None = None,
    num_vars: int | None = None,
) -> ValidationReport:
    """Random F_p[i] checks of the value identity and the display rank identity."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    field = field or FpiField()
    d = max(num_vars or 0, max_variable(expr), max(rep.Q.keys(), default=0), 1)
    rng = np.random.default_rng(seed)
    L = display(rep)
    defined = 0
    failures = []
    for t in range(trials):
        X = [random_matrix(m_test, rng, field) for _ in range(d)]
        try:
            val = evaluate_matrix(expr, X)
        except SingularSubexpression:
            continue
        defined += 1
        try:
            rv = represented_value(rep, X, field)
        except SingularMatrix:
            failures.append(f"trial {t}: Q(X) singular where the expression is defined")
            continue
        if not (rv == val):
            failures.append(f"trial {t}: -uQ^-1v differs from the expression value")
        lhs = val.rank() + m_test * rep.dim
        rhs = L.evaluate(X, field).rank()
        if lhs != rhs:
            failures.append(f"trial {t}: rank identity {lhs} != {rhs}")
    if defined == 0:
        raise InsufficientSamples(f"all {trials} samples fell outside the domain")
    return ValidationReport(not failures, trials, defined, tuple(failures))


def validate_rep(
    rep: FormalLinearRep,
    expr: Expr,
    trials: int = 5,
    m_test: int = 3,
    seed: int = 0,
    field: FpiField | None = None,
) -> bool:
    """True iff every sampled point in the domain passes both identities.

    Raises:
        InsufficientSamples: no sample landed in the domain of ``expr``.
    """
    return validate_rep_report(rep, expr, trials, m_test, seed, field).ok
