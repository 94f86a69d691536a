"""Explicit atom formulas and bounds for polynomials in two (or d) free variables.

These are fast paths for special polynomials and oracles for the generic
engine in :mod:`ncatoms.freemodel`.  Measures are :class:`AtomicMeasure`
objects; "largest atom" always means the largest weight, wherever it sits.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import DomainError, HypothesisNotMet, InjectivityViolatedOnGrid, UnclassifiableMonomial
from .measures import AtomicMeasure
from .ncexpr import Expr, evaluate_commutative, expand_polynomial
from .scalar import ONE, ZERO, Scalar

_F0 = Fraction(0)


def _pos(w: Fraction) -> Fraction:
    return w if w > 0 else _F0


def _pair_rule(mu: AtomicMeasure, nu: AtomicMeasure, op, skip_zero_factors: bool = False) -> dict:
    out: dict[Scalar, Fraction] = {}
    for (lam, w1), (rho, w2) in itertools.product(mu, nu):
        if skip_zero_factors and (not lam or not rho):
            continue
        if w1 + w2 > 1:
            a = op(lam, rho)
            out[a] = max(out.get(a, _F0), w1 + w2 - 1)
    return out


def additive_atoms(mu: AtomicMeasure, nu: AtomicMeasure) -> AtomicMeasure:
    """Atoms of the free additive convolution: ``mu(l) + nu(r) - 1`` at ``l + r``."""
    return AtomicMeasure.from_dict(_pair_rule(mu, nu, lambda a, b: a + b))


def _check_nonnegative(mu: AtomicMeasure, what: str = "first measure"):
    for a in mu.locations:
        if not a.is_real or a.re < 0:
            raise DomainError(f"{what} must be supported on [0, inf); atom at {a}")


def multiplicative_atoms(mu: AtomicMeasure, nu: AtomicMeasure) -> AtomicMeasure:
    """Atoms of the free multiplicative convolution with ``mu`` on ``[0, inf)``.

    Nonzero atoms come from pairs ``l * r = a`` with weights summing above
    1; the atom at 0 is ``max(mu{0}, nu{0})``.
    """
    _check_nonnegative(mu)
    out = _pair_rule(mu, nu, lambda a, b: a * b, skip_zero_factors=True)
    z = max(mu.weight(ZERO), nu.weight(ZERO))
    if z > 0:
        out[ZERO] = z
    return AtomicMeasure.from_dict(out)


def commutator_atoms(mu: AtomicMeasure, nu: AtomicMeasure) -> AtomicMeasure:
    """Atoms of ``i(XY - YX)``: only at 0, weight ``max(2t-1, 2s-1, 0)``."""
    w = _pos(max(2 * mu.max_weight - 1, 2 * nu.max_weight - 1))
    return AtomicMeasure.from_dict({ZERO: w})


def _largest_nonzero(mu: AtomicMeasure) -> Fraction:
    return max((w for a, w in mu if a), default=_F0)


def anticommutator_atoms(mu: AtomicMeasure, nu: AtomicMeasure) -> AtomicMeasure:
    """Atoms of ``XY + YX``.

    At 0 the weight is ``max(2t-1, 2s-1, s+u-1, t+r-1, 0)`` where ``t, s``
    are the atoms at 0 and ``u, r`` the largest atoms away from 0.  Away
    from 0 the atoms come from pairs with ``2 l r = a``.
    """
    t, s = mu.weight(ZERO), nu.weight(ZERO)
    u, r = _largest_nonzero(mu), _largest_nonzero(nu)
    out = _pair_rule(mu, nu, lambda a, b: 2 * a * b, skip_zero_factors=True)
    zero = _pos(max(2 * t - 1, 2 * s - 1, s + u - 1, t + r - 1))
    if zero > 0:
        out[ZERO] = zero
    return AtomicMeasure.from_dict(out)


def multiplicative_commutator_atoms(mu: AtomicMeasure, nu: AtomicMeasure) -> AtomicMeasure:
    """Atoms of ``X Y X^-1 Y^-1`` for invertible X, Y: only at 1."""
    for m, name in ((mu, "first"), (nu, "second")):
        if m.weight(ZERO) > 0:
            raise DomainError(f"{name} measure has an atom at 0; the variable is not invertible")
    w = _pos(max(2 * mu.max_weight - 1, 2 * nu.max_weight - 1))
    return AtomicMeasure.from_dict({ONE: w})


# ---------------------------------------------------------------------------
# lower bounds


def lower_bound_unavoidable(locations: Sequence, weights: Sequence, P: Expr | None = None) -> Fraction:
    """``max(sum t_i - (d-1), 0)``: guaranteed mass at ``P(locations)``."""
    ws = [Fraction(w) if not isinstance(w, str) else Fraction(w) for w in weights]
    if len(ws) != len(locations):
        raise ValueError("need one weight per location")
    if P is not None and evaluate_commutative(P, [Scalar.coerce(x) for x in locations]) is None:
        raise DomainError("P is undefined at the given locations")
    return _pos(sum(ws, _F0) - (len(ws) - 1))


def lower_bound_factored(k: int, t) -> Fraction:
    """``max(k t - (k-1), 0)``: mass at 0 for a sum of k terms each through x."""
    if k < 1:
        raise ValueError("k must be >= 1")
    t = Fraction(t)
    return _pos(k * t - (k - 1))


def mixed_no_atoms_outside_zero(t, s) -> bool:
    """True iff ``t + s >= 1``, which rules out nonzero atoms of mixed polynomials."""
    return Fraction(t) + Fraction(s) >= 1


# ---------------------------------------------------------------------------
# injectivity on atom grids


def grid_injectivity_violation(P: Expr, grids: Sequence[Sequence[Scalar]], a: Scalar):
    """First witness that changing one coordinate keeps the value ``a``, or None."""
    grids = [list(g) for g in grids]
    for pt in itertools.product(*grids):
        if evaluate_commutative(P, pt) != a:
            continue
        for i, g in enumerate(grids):
            for alt in g:
                if alt == pt[i]:
                    continue
                q = list(pt)
                q[i] = alt
                if evaluate_commutative(P, q) == a:
                    return tuple(pt), tuple(q)
    return None


def injective_polynomial_atoms(
    P: Expr,
    mu: AtomicMeasure,
    nu: AtomicMeasure,
    assume_injective: bool = False,
    exclude: Sequence = (),
) -> AtomicMeasure:
    """Atoms of an injective two-variable polynomial.

    The atom at ``a = P(l, r)`` has weight ``mu(l) + nu(r) - 1`` when this
    is positive.  Injectivity (no other atom location in one coordinate
    gives the same value) is checked on the atom grid unless
    ``assume_injective`` is set.  Locations in ``exclude`` are left out of
    both the check and the result (e.g. ``a = 0`` for ``xyx``).

    Raises:
        InjectivityViolatedOnGrid: two grid points differing in one
            coordinate share the value ``a``.
    """
    excluded = {Scalar.coerce(a) for a in exclude}
    grids = [mu.locations, nu.locations]
    values = {}
    for (lam, w1), (rho, w2) in itertools.product(mu, nu):
        a = evaluate_commutative(P, [lam, rho])
        if a is None or a in excluded:
            continue
        values.setdefault(a, []).append(w1 + w2 - 1)
    out = {}
    for a, cands in values.items():
        if not assume_injective:
            bad = grid_injectivity_violation(P, grids, a)
            if bad is not None:
                raise InjectivityViolatedOnGrid(f"P takes the value {a} at {bad[0]} and {bad[1]}")
        w = max(cands)
        if w > 0:
            out[a] = w
    return AtomicMeasure.from_dict(out)


def injective_dvar_atom(
    P: Expr,
    locations: Sequence,
    weights: Sequence,
    grids: Sequence[Sequence] | None = None,
) -> Fraction:
    """Exact atom ``sum t_i - (d-1)`` at ``P(locations)`` for P injective there.

    Raises:
        HypothesisNotMet: ``sum t_i < d - 1``.
        InjectivityViolatedOnGrid: ``grids`` given and injectivity fails on them.
    """
    locs = [Scalar.coerce(x) for x in locations]
    ws = [Fraction(w) for w in weights]
    d = len(locs)
    if len(ws) != d:
        raise ValueError("need one weight per location")
    total = sum(ws, _F0)
    if total < d - 1:
        raise HypothesisNotMet(f"sum of weights {total} is below d - 1 = {d - 1}")
    a = evaluate_commutative(P, locs)
    if a is None:
        raise DomainError("P is undefined at the given locations")
    if grids is not None:
        bad = grid_injectivity_violation(P, [[Scalar.coerce(x) for x in g] for g in grids], a)
        if bad is not None:
            raise InjectivityViolatedOnGrid(f"P takes the value {a} at {bad[0]} and {bad[1]}")
    return total - (d - 1)


# ---------------------------------------------------------------------------
# Subs map and the 2x2 determinant condition

UPoly = tuple  # coefficients in t, index = power


def _padd(a: dict, power: int, c: Scalar):
    s = a.get(power, ZERO) + c
    if s:
        a[power] = s
    else:
        a.pop(power, None)


def _to_tuple(p: dict) -> UPoly:
    if not p:
        return ()
    return tuple(p.get(k, ZERO) for k in range(max(p) + 1))


def _blocks(word: tuple[int, ...]) -> list[int]:
    return [k for k, _ in itertools.groupby(word)]


def monomial_class(word: tuple[int, ...]) -> int:
    """1 for x...y, 2 for y...x, 3 for x...x, 4 for y...y (x = variable 1)."""
    if not word:
        raise UnclassifiableMonomial("constant monomial has no class")
    if any(k not in (1, 2) for k in word):
        raise UnclassifiableMonomial(f"monomial {word} uses variables other than x1, x2")
    first, last = word[0], word[-1]
    return {(1, 2): 1, (2, 1): 2, (1, 1): 3, (2, 2): 4}[(first, last)]


def subs_exponent(word: tuple[int, ...]) -> int:
    """Power of t: number of blocks of the leading variable, minus one."""
    b = len(_blocks(word))
    return (b + 1) // 2 - 1


@dataclass(frozen=True)
class SubsDecomposition:
    """Images of the four shape classes under the Subs map at ``(lam, rho)``."""

    lam: Scalar
    rho: Scalar
    p1: UPoly
    p2: UPoly
    p3: UPoly
    p4: UPoly

    def component(self, k: int) -> UPoly:
        return (self.p1, self.p2, self.p3, self.p4)[k - 1]

    def evaluate(self, k: int, t) -> Scalar:
        t = Scalar.coerce(t)
        acc = ZERO
        for c in reversed(self.component(k)):
            acc = acc * t + c
        return acc


def subs_decompose(P: Expr, lam, rho) -> SubsDecomposition:
    """Split P into the classes x..y, y..x, x..x, y..y and apply Subs to each.

    A monomial ``m`` maps to ``m(lam, rho) * t^(k-1)`` with ``k`` the number
    of blocks of its first letter.

    Raises:
        UnclassifiableMonomial: P has a constant term or a third variable.
    """
    lam, rho = Scalar.coerce(lam), Scalar.coerce(rho)
    comps: list[dict] = [{}, {}, {}, {}]
    for word, c in expand_polynomial(P).items():
        cls = monomial_class(word)
        val = c
        for k in word:
            val = val * (lam if k == 1 else rho)
        _padd(comps[cls - 1], subs_exponent(word), val)
    return SubsDecomposition(lam, rho, *(_to_tuple(p) for p in comps))


def _pmul(a: UPoly, b: UPoly) -> dict:
    out: dict = {}
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            _padd(out, i + j, x * y)
    return out


def determinant_condition(P: Expr, lam, rho) -> bool:
    """True iff ``t S1(t) S2(t)`` and ``S3(t) S4(t)`` differ as polynomials.

    Two polynomials agree on all of [0, 1] only if they are identical, so
    this decides whether they differ for some t in [0, 1].
    """
    D = subs_decompose(P, lam, rho)
    left = {k + 1: v for k, v in _pmul(D.p1, D.p2).items()}
    right = _pmul(D.p3, D.p4)
    keys = set(left) | set(right)
    return any(left.get(k, ZERO) != right.get(k, ZERO) for k in keys)


def two_by_two_model(lam, rho, a: int, b: int):
    """Exact ``(lam R, rho T)`` with ``T`` the rank-one projection at angle (a, b).

    ``t = a^2 / (a^2 + b^2)`` so that ``sqrt(t(1-t)) = ab/(a^2+b^2)`` is rational.
    """
    from .exactla import QiMatrix

    lam, rho = Scalar.coerce(lam), Scalar.coerce(rho)
    n2 = Fraction(a * a + b * b)
    t = Fraction(a * a) / n2
    c = Fraction(a * b) / n2
    R = QiMatrix([[ONE, ZERO], [ZERO, ZERO]])
    T = QiMatrix([[Scalar(t), Scalar(c)], [Scalar(c), Scalar(1 - t)]])
    return R.scale(lam), T.scale(rho), R, T, t


# ---------------------------------------------------------------------------
# criteria based on the determinant condition


@dataclass(frozen=True)
class Criteria1Result:
    """Conclusions available from the determinant-condition criterion.

    ``zero_upper_bound`` is always valid; ``zero_exact`` is set when the
    atom at 0 is pinned down; ``no_atoms_outside_zero`` holds for mixed P.
    ``measure`` is the full answer when the conclusions determine it.
    """

    zero_upper_bound: Fraction
    zero_lower_bound: Fraction
    zero_exact: Fraction | None
    no_atoms_outside_zero: bool
    matching: tuple[tuple[Scalar | None, Scalar | None], ...]
    measure: AtomicMeasure | None


def _slots(mu: AtomicMeasure, n: int) -> list[Scalar | None]:
    """Nonzero atom locations repeated ``w n`` times; None marks a diffuse slot."""
    out: list[Scalar | None] = []
    for a, w in mu:
        if a:
            out.extend([a] * int(w * n))
    diffuse = 1 - mu.total
    out.extend([None] * int(diffuse * n))
    return out


def _generic_value(rng) -> Scalar:
    return Scalar(Fraction(int(rng.integers(10**5, 10**8)), int(rng.integers(1, 10**4))))


def _det_cond_slot(P, lam, rho, rng) -> bool:
    # a diffuse slot may be placed anywhere; one good generic choice suffices
    for _ in range(3):
        lv = lam if lam is not None else _generic_value(rng)
        rv = rho if rho is not None else _generic_value(rng)
        if determinant_condition(P, lv, rv):
            return True
        if lam is not None and rho is not None:
            return False
    return False


def is_mixed(P: Expr) -> bool:
    """Every monomial contains both x1 and x2 (so P(0, y) = P(x, 0) = 0)."""
    return all(1 in w and 2 in w for w in expand_polynomial(P))


def criteria1_atoms(P: Expr, mu: AtomicMeasure, nu: AtomicMeasure, seed: int = 0) -> Criteria1Result:
    """Bounds on the atom at 0 from a determinant-condition matching.

    Requires ``t = mu{0} >= s = nu{0}`` and ``t + s >= 1``.  The nonzero
    parts of the marginals are cut into slots of mass ``1/n``; an injective
    matching of the ``mu`` slots into the ``nu`` slots along pairs that meet
    the determinant condition gives: atom at 0 at most ``2t - 1``; exactly
    ``s + t - 1`` if ``P(0, r) != 0`` for every nonzero atom r of ``nu``;
    and no other atoms when P is mixed.

    Raises:
        HypothesisNotMet: ``t < s``, ``t + s < 1`` or no such matching.
    """
    t, s = mu.weight(ZERO), nu.weight(ZERO)
    if t < s:
        raise HypothesisNotMet("need mu{0} >= nu{0}; swap the roles of x and y")
    if t + s < 1:
        raise HypothesisNotMet("need mu{0} + nu{0} >= 1")
    n = math.lcm(mu.denominator(), nu.denominator())
    left, right = _slots(mu, n), _slots(nu, n)
    rng = np.random.default_rng([seed, 104729])
    matching: list[tuple] = []
    if left:
        if len(left) > len(right):
            raise HypothesisNotMet("more nonzero slots for x than for y: no injective matching")
        cache: dict = {}
        rows, cols = [], []
        for i, lam in enumerate(left):
            for j, rho in enumerate(right):
                key = (lam, rho)
                if key not in cache:
                    cache[key] = _det_cond_slot(P, lam, rho, rng)
                if cache[key]:
                    rows.append(i)
                    cols.append(j)
        graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(left), len(right)))
        match = maximum_bipartite_matching(graph, perm_type="column")
        if np.any(match < 0):
            raise HypothesisNotMet("no injective matching satisfying the determinant condition")
        matching = [(left[i], right[int(j)]) for i, j in enumerate(match)]
    upper = _pos(2 * t - 1)
    lower = _pos(s + t - 1)
    exact = None
    nonzero_rho = [r for r in nu.locations if r]
    checks = [evaluate_commutative(P, [ZERO, r]) for r in nonzero_rho]
    generic_ok = True
    if nu.total < 1:
        # P(0, y) must not vanish identically for diffuse slots
        generic_ok = any(1 not in w for w in expand_polynomial(P))
    if all(c is not None and c for c in checks) and generic_ok and (nonzero_rho or nu.total < 1):
        exact = lower
    elif upper == lower:
        exact = lower
    mixed = is_mixed(P)
    measure = None
    if exact is not None and mixed:
        measure = AtomicMeasure.from_dict({ZERO: exact})
    return Criteria1Result(upper, lower, exact, mixed, tuple(matching), measure)
