"""Validation grids: closed forms against the generic engine, plus test corpora.

Each suite yields :class:`CaseResult` records; a suite passes when every
case does.  The same generators feed the acceptance tests and the
``validate`` CLI command.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np

from . import closedforms as cf
from .errors import HypothesisNotMet
from .freemodel import EngineOptions, analyze_point_spectrum, candidate_locations, divisibility_check, vn_rank
from .measures import AtomicMeasure, MarginalSpec
from .ncexpr import Expr, evaluate_commutative, polynomial_from_terms
from .parser import parse_expression
from .scalar import ZERO, Scalar

MAX_LCM = 12  # keeps blow-up sizes of the grids small


@dataclass(frozen=True)
class CaseResult:
    suite: str
    label: str
    ok: bool
    expected: str = ""
    got: str = ""
    agreement: bool = True

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class SuiteReport:
    name: str
    cases: tuple[CaseResult, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cases)

    @property
    def failures(self) -> list[CaseResult]:
        return [c for c in self.cases if not c.ok]

    def to_json(self) -> dict:
        return {
            "suite": self.name,
            "ok": self.ok,
            "cases": len(self.cases),
            "failures": [c.to_json() for c in self.failures],
        }


# ---------------------------------------------------------------------------
# measure grids


def measures_on(locations: Sequence, denominator: int, allow_deficit: bool = True) -> list[AtomicMeasure]:
    """Every measure on ``locations`` with weights in ``(1/q) Z`` (total <= 1)."""
    locs = [Scalar.coerce(x) for x in locations]
    out = []
    for ks in itertools.product(range(denominator + 1), repeat=len(locs)):
        s = sum(ks)
        if s == 0 or s > denominator or (not allow_deficit and s < denominator):
            continue
        out.append(AtomicMeasure.from_dict({a: Fraction(k, denominator) for a, k in zip(locs, ks)}))
    return out


def measure_pool(locations: Sequence, max_denominator: int) -> list[AtomicMeasure]:
    """Distinct measures on ``locations`` with weight denominators up to ``max_denominator``."""
    seen = {}
    for q in range(1, max_denominator + 1):
        for m in measures_on(locations, q):
            seen.setdefault(m.atoms, m)
    return list(seen.values())


def measure_pairs(
    locations: Sequence, max_denominator: int, count: int, seed: int = 0, max_lcm: int = MAX_LCM
) -> list[tuple[AtomicMeasure, AtomicMeasure]]:
    """Deterministic sample of ``count`` pairs whose joint lcm is at most ``max_lcm``."""
    pool = measure_pool(locations, max_denominator)
    pairs = [
        (a, b) for a, b in itertools.product(pool, repeat=2) if math.lcm(a.denominator(), b.denominator()) <= max_lcm
    ]
    if len(pairs) <= count:
        return pairs
    rng = np.random.default_rng([seed, 31337])
    idx = sorted(rng.choice(len(pairs), size=count, replace=False))
    return [pairs[i] for i in idx]


def random_measure(rng: np.random.Generator, locations: Sequence, denominator: int) -> AtomicMeasure:
    locs = [Scalar.coerce(x) for x in locations]
    k = int(rng.integers(1, min(len(locs), denominator) + 1))
    chosen = sorted(rng.choice(len(locs), size=k, replace=False))
    total = int(rng.integers(k, denominator + 1))
    # random composition of `total` into k positive parts
    cuts = sorted(rng.choice(np.arange(1, total), size=k - 1, replace=False)) if k > 1 else []
    parts = np.diff([0, *cuts, total])
    return AtomicMeasure.from_dict({locs[i]: Fraction(int(p), denominator) for i, p in zip(chosen, parts)})


def random_spec(
    rng: np.random.Generator,
    d: int = 2,
    locations: Sequence = (0, 1, 2),
    max_denominator: int = 6,
    max_lcm: int = MAX_LCM,
) -> MarginalSpec:
    while True:
        qs = [int(rng.integers(1, max_denominator + 1)) for _ in range(d)]
        if math.lcm(*qs) <= max_lcm:
            break
    return MarginalSpec.of(*(random_measure(rng, locations, q) for q in qs))


def random_polynomial(rng: np.random.Generator, d: int = 2, max_degree: int = 4, max_terms: int = 3) -> Expr:
    """Random nonconstant polynomial with small integer coefficients."""
    terms = {}
    for _ in range(int(rng.integers(1, max_terms + 1))):
        deg = int(rng.integers(1, max_degree + 1))
        word = tuple(int(v) for v in rng.integers(1, d + 1, size=deg))
        terms[word] = Scalar(int(rng.choice([-2, -1, 1, 2, 3])))
    if rng.random() < 0.3:
        terms[()] = Scalar(int(rng.integers(-2, 3)))
    return polynomial_from_terms(terms)


def smaller_spec(rng: np.random.Generator, spec: MarginalSpec) -> MarginalSpec:
    """Pointwise smaller atoms (same denominators): each weight lowered by a random amount."""
    out = []
    for mu in spec.measures:
        q = mu.denominator()
        out.append(
            AtomicMeasure.from_dict({a: Fraction(int(rng.integers(0, int(w * q) + 1)), q) for a, w in mu})
        )
    return MarginalSpec.of(*out)


# ---------------------------------------------------------------------------
# corpora

LINREP_CORPUS: tuple[str, ...] = (
    "x1",
    "3",
    "x1 + x2",
    "x1*x2",
    "x1*x2 - x2*x1",
    "i*(x1*x2 - x2*x1)",
    "x1*x2 + x2*x1",
    "x1^2 + x2^2",
    "x1*x2*x1",
    "x1^3 - 2*x1*x2 + 1/2",
    "(1 + x1)^-1",
    "x1^-1",
    "(x1 + x2)^-1",
    "x1*x2*x1^-1*x2^-1",
    "x1*x2*x1^-1*x2^-1 - 1",
    "x1*x2^-2*x1 + x2*x1^-2*x2",
    "(x1^-1 + x2^-1)^-1",
    "((x1 + 1)^-1 + x2)^-1",
    "(x1*x2 - x2*x1)^-1",
    "x1*(x2 + x1^-1)^-1*x1",
    "(1 + (1 + (1 + x1)^-1)^-1)^-1",
    "(x1 - 2)^-1*x2*(x1 - 2)^-1",
    "(x1 + i*x2)^-1",
    "x1^-2 + x2^-2",
    "(x1*x2*x1 + 1)^-1 - x2",
    "x1*x2*x3 - x3*x2*x1",
    "(x1 + x2 + x3)^-1*x1",
    "(x1^-1*x2 - x2*x1^-1)^-1",
    "1/3*x1 - 2/5*x2^2",
    "((x1^-1 + 1)^-1 + (x2^-1 + 1)^-1)^-1",
)


def linrep_corpus() -> list[Expr]:
    return [parse_expression(s) for s in LINREP_CORPUS]


# ---------------------------------------------------------------------------
# comparators


def _engine(R: Expr, spec: MarginalSpec, options: EngineOptions | None, candidates=None):
    rep = analyze_point_spectrum(R, spec, candidates, options)
    return rep.measure, rep.agreement


def _compare(suite: str, label: str, R: Expr, spec: MarginalSpec, expected: AtomicMeasure, options) -> CaseResult:
    got, agree = _engine(R, spec, options)
    return CaseResult(suite, label, got == expected and agree, str(expected), str(got), agree)


def _label(*ms: AtomicMeasure) -> str:
    return " | ".join(str(m) for m in ms)


def additive_cases(count: int = 200, seed: int = 0, options=None) -> Iterator[CaseResult]:
    R = parse_expression("x1 + x2")
    for mu, nu in measure_pairs((0, 1, 2), 6, count, seed):
        yield _compare("additive", _label(mu, nu), R, MarginalSpec.of(mu, nu), cf.additive_atoms(mu, nu), options)


def multiplicative_cases(count: int = 120, seed: int = 1, options=None) -> Iterator[CaseResult]:
    """``x1 x2 x1`` has the law of ``x1^2`` times ``x2`` (free multiplicative convolution)."""
    R = parse_expression("x1*x2*x1")
    for mu, nu in measure_pairs((0, 1, 2), 6, count, seed):
        expected = cf.multiplicative_atoms(mu.pushforward(lambda a: a * a), nu)
        yield _compare("multiplicative", _label(mu, nu), R, MarginalSpec.of(mu, nu), expected, options)


def _largest_atom_family(t: Fraction) -> list[AtomicMeasure]:
    """Measures whose largest atom is ``t``: one with a diffuse rest, one fully atomic when possible."""
    fams = [AtomicMeasure.from_dict({0: t})]
    rest = 1 - t
    if 0 < rest <= t:
        fams.append(AtomicMeasure.from_dict({0: t, 1: rest}))
    elif rest > t:
        k = int(rest // t)
        atoms = {0: t}
        for j in range(1, k + 1):
            atoms[j] = t
        left = 1 - t * (k + 1)
        if left > 0:
            atoms[k + 1] = left
        fams.append(AtomicMeasure.from_dict(atoms))
    return fams


def commutator_cases(denominator: int = 6, options=None) -> Iterator[CaseResult]:
    R = parse_expression("i*(x1*x2 - x2*x1)")
    ts = [Fraction(k, denominator) for k in range(1, denominator + 1)]
    fam = [m for t in ts for m in _largest_atom_family(t)]
    for mu, nu in itertools.product(fam, repeat=2):
        yield _compare(
            "commutator", _label(mu, nu), R, MarginalSpec.of(mu, nu), cf.commutator_atoms(mu, nu), options
        )


def anticommutator_cases(count: int = 150, seed: int = 2, options=None) -> Iterator[CaseResult]:
    R = parse_expression("x1*x2 + x2*x1")
    for mu, nu in measure_pairs((-1, 0, 1), 4, count, seed):
        yield _compare(
            "anticommutator", _label(mu, nu), R, MarginalSpec.of(mu, nu), cf.anticommutator_atoms(mu, nu), options
        )


def multcomm_cases(count: int = 60, seed: int = 3, options=None) -> Iterator[CaseResult]:
    """Atom at 1 of ``X Y X^-1 Y^-1`` and the rank identity with ``XY - YX``."""
    R = parse_expression("x1*x2*x1^-1*x2^-1")
    C = parse_expression("x1*x2 - x2*x1")
    D = parse_expression("x1*x2*x1^-1*x2^-1 - 1")
    for mu, nu in measure_pairs((1, 2, -1), 4, count, seed):
        spec = MarginalSpec.of(mu, nu)
        expected = cf.multiplicative_commutator_atoms(mu, nu)
        got, agree = _engine(R, spec, options)
        r1, r2 = vn_rank(C, spec, options), vn_rank(D, spec, options)
        ok = got == expected and agree and r1 == r2
        yield CaseResult("multcomm", _label(mu, nu), ok, f"{expected}; rank {r1}", f"{got}; rank {r2}", agree)


def bounds_cases(options=None) -> Iterator[CaseResult]:
    """Lower bounds, the criterion with the determinant condition, and injective polynomials."""
    suite = "bounds"
    # unavoidable mass at P(l, r) and the factored bound
    polys = ["x1*x2 + x2*x1 + x1", "x1^2*x2 + x2*x1^2", "x1 + x2*x1*x2"]
    for text, (mu, nu) in itertools.product(polys, measure_pairs((0, 1), 4, 8, seed=5)):
        P = parse_expression(text)
        got, agree = _engine(P, MarginalSpec.of(mu, nu), options)
        ok = agree
        for (lam, w1), (rho, w2) in itertools.product(mu, nu):
            a = evaluate_commutative(P, [lam, rho])
            if got.weight(a) < cf.lower_bound_unavoidable([lam, rho], [w1, w2]):
                ok = False
        yield CaseResult(suite, f"unavoidable {text} {_label(mu, nu)}", ok, "above lower bounds", str(got), agree)
    # factored: P = x1*A + x1*B has at least k t - (k-1) at 0 for k = 1 term through x1 on the left
    for t in (Fraction(1, 2), Fraction(2, 3), Fraction(3, 4)):
        P = parse_expression("x1*x2 + x1*x2^2")
        mu = AtomicMeasure.from_dict({0: t, 1: 1 - t})
        nu = AtomicMeasure.from_dict({1: Fraction(1, 2), 2: Fraction(1, 2)})
        got, agree = _engine(P, MarginalSpec.of(mu, nu), options)
        lb = cf.lower_bound_factored(1, t)
        yield CaseResult(suite, f"factored t={t}", got.weight(ZERO) >= lb and agree, f">= {lb}", str(got), agree)
    # determinant-condition criterion
    crit_polys = ["x1^2*x2*x1 + x1*x2*x1^2", "x1*x2*x1", "x1*x2 + x2*x1", "x1*x2^2*x1"]
    grid = [
        (AtomicMeasure.from_dict(a), AtomicMeasure.from_dict(b))
        for a, b in [
            ({0: "2/3", 1: "1/3"}, {0: "1/2", 2: "1/2"}),
            ({0: "3/4", 2: "1/4"}, {0: "1/4", 1: "3/4"}),
            ({0: "1/2", 1: "1/2"}, {0: "1/2", 1: "1/2"}),
            ({0: "2/3"}, {0: "1/3", 1: "1/3"}),
            ({0: "1/2", 3: "1/4"}, {0: "1/2", 1: "1/4", 2: "1/4"}),
        ]
    ]
    for text, (mu, nu) in itertools.product(crit_polys, grid):
        P = parse_expression(text)
        try:
            res = cf.criteria1_atoms(P, mu, nu)
        except HypothesisNotMet:
            continue
        got, agree = _engine(P, MarginalSpec.of(mu, nu), options)
        z = got.weight(ZERO)
        ok = agree and res.zero_lower_bound <= z <= res.zero_upper_bound
        if res.zero_exact is not None:
            ok = ok and z == res.zero_exact
        if res.no_atoms_outside_zero:
            ok = ok and all(a == ZERO for a in got.locations)
        yield CaseResult(
            suite,
            f"criterion {text} {_label(mu, nu)}",
            ok,
            f"[{res.zero_lower_bound}, {res.zero_upper_bound}] exact={res.zero_exact}",
            str(got),
            agree,
        )
    # injective polynomials: no collisions on the grid
    for text, (mu, nu) in itertools.product(["x1 + 2*x2", "x1 + x2 + x1*x2*x1"], measure_pairs((0, 1), 3, 10, 6)):
        P = parse_expression(text)
        try:
            expected = cf.injective_polynomial_atoms(P, mu, nu)
        except HypothesisNotMet:
            continue
        yield _compare(suite, f"injective {text} {_label(mu, nu)}", P, MarginalSpec.of(mu, nu), expected, options)


def closedform_cases(options=None) -> Iterator[CaseResult]:
    """Every two-variable convolution rule against the engine."""
    yield from commutator_cases(options=options)
    yield from anticommutator_cases(count=60, options=options)
    yield from multcomm_cases(count=20, options=options)


def linrep_cases(trials: int = 5, seed: int = 0) -> Iterator[CaseResult]:
    from .linrep import linearize, validate_rep_report

    for text, expr in zip(LINREP_CORPUS, linrep_corpus()):
        rep = linearize(expr)
        r = validate_rep_report(rep, expr, trials=trials, seed=seed)
        yield CaseResult("linrep", text, r.ok, "all identities", "; ".join(r.failures) or f"{r.defined} samples ok")


def divisibility_cases(count: int = 100, polys: int = 20, seed: int = 0, options=None) -> Iterator[CaseResult]:
    rng = np.random.default_rng([seed, 6])
    P = [random_polynomial(rng) for _ in range(polys)]
    for k in range(count):
        spec = random_spec(rng)
        R = P[k % polys]
        got, agree = _engine(R, spec, options)
        yield CaseResult("divisibility", f"case {k}", divisibility_check(got, spec), f"multiples of 1/{spec.n}", str(got), agree)


def monotonicity_cases(count: int = 50, seed: int = 0, options=None) -> Iterator[CaseResult]:
    rng = np.random.default_rng([seed, 7])
    for k in range(count):
        big = random_spec(rng, locations=(0, 1), max_denominator=4)
        small = smaller_spec(rng, big)
        R = random_polynomial(rng, max_degree=3)
        cands = sorted(
            set(candidate_locations(R, big, seed)) | set(candidate_locations(R, small, seed)), key=Scalar.sort_key
        )
        lo, a1 = _engine(R, small, options, cands)
        hi, a2 = _engine(R, big, options, cands)
        yield CaseResult("monotonicity", f"case {k}", lo.leq(hi), str(hi), str(lo), a1 and a2)


SUITES: dict[str, Callable[..., Iterator[CaseResult]]] = {
    "additive": additive_cases,
    "multiplicative": multiplicative_cases,
    "commutator": commutator_cases,
    "anticommutator": anticommutator_cases,
    "multcomm": multcomm_cases,
    "bounds": bounds_cases,
    "closedforms": closedform_cases,
    "linrep": linrep_cases,
    "divisibility": divisibility_cases,
    "monotonicity": monotonicity_cases,
}


def run_suite(name: str, **kwargs) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return SuiteReport(name, tuple(SUITES[name](**kwargs)))
