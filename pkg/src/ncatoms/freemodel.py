"""Exact atom engine: algebraic models over the free field and blow-up ranks.

A normal variable whose atoms have weights in ``(1/n) Z`` is modelled by
``X = U D U^{-1}`` where ``D`` is an ``n x n`` diagonal holding each atom
``w n`` times followed by fresh diffuse symbols, and ``U`` is an ``n x n``
grid of fresh symbols.  The von Neumann rank of ``R(X_1, ..., X_d)`` equals
the inner rank of ``R(X̄)`` over the free field divided by ``n``, and the
atom of ``R`` at ``a`` has weight ``1 - rank(a - R)``.

Inner ranks are estimated by substituting independent uniform ``m x m``
matrices over F_p[i] for every fresh symbol and taking ``ceil(rank / m)``;
random specialization can only lose rank, so the maximum over trials is
used.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np
import sympy

from .errors import (
    PersistentPole,
    RNotDefinedAtFreeTuple,
    SingularSubexpression,
    SpecError,
)
from .exactla import DEFAULT_PRIME, FpiField, FpiMatrix, random_invertible, random_matrix
from .linrep import display, linearize
from .measures import AtomicMeasure, MarginalSpec, VariableMarginal, location_from_json
from .ncexpr import Const, Expr, Prod, Sum, evaluate_commutative, evaluate_matrix, max_variable
from .scalar import ONE, Scalar

MAX_RESAMPLES = 20
MAX_N = 120  # largest weight-denominator lcm the exact engine accepts
DEFAULT_TRIALS = 3


# ---------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class Slot:
    """One diagonal entry of a model: an atom location or a diffuse symbol."""

    atom: Scalar | None = None
    symbol: str | None = None

    @property
    def is_atom(self) -> bool:
        return self.atom is not None


@dataclass(frozen=True)
class AlgebraicModel:
    n: int
    diagonals: tuple[tuple[Slot, ...], ...]
    grids: tuple[tuple[tuple[str, ...], ...], ...]
    spec: MarginalSpec = field(compare=False)

    @property
    def d(self) -> int:
        return len(self.diagonals)

    @property
    def symbols(self) -> list[str]:
        out = []
        for k in range(self.d):
            out.extend(s for row in self.grids[k] for s in row)
            out.extend(sl.symbol for sl in self.diagonals[k] if not sl.is_atom)
        return out


def build_model(spec: MarginalSpec) -> AlgebraicModel:
    """Diagonal templates (sorted atoms, then diffuse slots) and symbol grids."""
    n = spec.n
    if n > MAX_N:
        raise SpecError(f"weight denominators have lcm {n} > {MAX_N}; round the weights with approximate_marginals")
    diagonals, grids = [], []
    for k, measure in enumerate(spec.measures, start=1):
        slots = []
        for loc, w in measure:
            reps = w * n
            if reps.denominator != 1:
                raise SpecError(f"weight {w} is not a multiple of 1/{n}")
            slots.extend(Slot(atom=loc) for _ in range(int(reps)))
        free = n - len(slots)
        slots.extend(Slot(symbol=f"y{k}_{ell}") for ell in range(1, free + 1))
        diagonals.append(tuple(slots))
        grids.append(tuple(tuple(f"u{k}_{i}_{j}" for j in range(1, n + 1)) for i in range(1, n + 1)))
    return AlgebraicModel(n, tuple(diagonals), tuple(grids), spec)


def evaluate_model(model: AlgebraicModel, m: int, rng: np.random.Generator, field: FpiField | None = None):
    """Random specialization of every ``X̄_k`` as an ``(n m) x (n m)`` matrix.

    Returns ``(matrices, retries)``, ``retries`` counting rejected singular
    samples of the ``U`` grids.
    """
    if m < 1:
        raise ValueError("blow-up size must be >= 1")
    field = field or FpiField()
    n = model.n
    out, retries = [], 0
    for diag in model.diagonals:
        if all(sl.is_atom for sl in diag) and len({sl.atom for sl in diag}) == 1:
            # scalar matrix: conjugation is the identity map
            out.append(FpiMatrix.identity(n * m, field).scale(diag[0].atom))
            continue
        U, Uinv, r = random_invertible(n * m, rng, field)
        retries += r
        blocks = [
            FpiMatrix.identity(m, field).scale(sl.atom) if sl.is_atom else random_matrix(m, rng, field) for sl in diag
        ]
        D = FpiMatrix.block_diag(blocks)
        out.append(U @ D @ Uinv)
    return out, retries


# ---------------------------------------------------------------------------
# blow-up rank estimation


@dataclass(frozen=True)
class NcRankReport:
    value: int
    blowup_sizes_used: tuple[int, ...]
    trials_per_size: int
    agreement: bool
    resamples_due_to_poles: int
    estimates: Mapping[int, tuple[int, ...]] = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "blowup_sizes_used": list(self.blowup_sizes_used),
            "trials_per_size": self.trials_per_size,
            "agreement": self.agreement,
            "resamples_due_to_poles": self.resamples_due_to_poles,
            "estimates": {str(m): list(v) for m, v in self.estimates.items()},
        }


def _check_schedule(schedule: Sequence[int]) -> tuple[int, ...]:
    sched = tuple(int(m) for m in schedule)
    if not sched or any(m < 1 for m in sched) or list(sched) != sorted(set(sched)):
        raise ValueError("schedule must be a nonempty strictly ascending list of positive sizes")
    return sched


def default_schedule(size: int) -> tuple[int, int]:
    """Two consecutive sizes ending at the assembled matrix size (at least 2)."""
    s = max(int(size), 2)
    return (s - 1, s)


def _seed_of(seed) -> int:
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(0, 2**63 - 1))
    return int(seed)


def blowup_ranks(
    sample: Callable[[int, np.random.Generator], object],
    rankers: Sequence[Callable[[object], int]],
    schedule: Sequence[int],
    trials: int = DEFAULT_TRIALS,
    seed=0,
    max_resamples: int = MAX_RESAMPLES,
) -> list[NcRankReport]:
    """Shared driver: one sample per (size, trial), many rank functionals.

    ``sample(m, rng)`` produces a random specialization (raising
    :class:`SingularSubexpression` on a pole); each ranker maps it to the
    rank of one blown-up matrix.  Returns one report per ranker.

    Raises:
        PersistentPole: every trial at the largest size kept hitting poles.
    """
    sched = _check_schedule(schedule)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    base = _seed_of(seed)
    k = len(rankers)
    est: list[dict[int, list[int]]] = [{m: [] for m in sched} for _ in range(k)]
    resamples = 0
    for m in sched:
        for t in range(trials):
            rng = np.random.default_rng([base, m, t])
            state = None
            for _attempt in range(max_resamples + 1):
                try:
                    state = sample(m, rng)
                    break
                except SingularSubexpression:
                    resamples += 1
            if state is None:
                continue
            for j, rk in enumerate(rankers):
                est[j][m].append(-(-rk(state) // m))
    top = sched[-1]
    if k and not est[0][top]:
        raise PersistentPole(f"all {trials} trials at blow-up size {top} hit a singular inverse")
    reports = []
    for j in range(k):
        at = {m: max(v) for m, v in est[j].items() if v}
        value = at[top]
        agree = len(set(est[j][top])) == 1 and len(est[j][top]) == trials
        if len(sched) >= 2:
            prev = sched[-2]
            agree = agree and at.get(prev) == value
        reports.append(
            NcRankReport(value, sched, trials, agree, resamples, {m: tuple(v) for m, v in est[j].items()})
        )
    return reports


ExprMatrix = Sequence[Sequence[Expr]]


def _as_matrix(A) -> list[list[Expr]]:
    if isinstance(A, Expr):
        return [[A]]
    rows = [list(r) for r in A]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("expression matrix must be nonempty and rectangular")
    return rows


def _evaluate_block(A: list[list[Expr]], X: Sequence[FpiMatrix]) -> FpiMatrix:
    vals = [[evaluate_matrix(e, X) for e in row] for row in A]
    if len(vals) == 1 and len(vals[0]) == 1:
        return vals[0][0]
    return FpiMatrix.block(vals)


def ncrank(
    A,
    model: AlgebraicModel,
    schedule: Sequence[int] | None = None,
    trials: int = DEFAULT_TRIALS,
    rng=0,
    prime: int = DEFAULT_PRIME,
) -> NcRankReport:
    """Inner rank over the free field of ``A(X̄)`` (an ``(s n) x (t n)`` matrix).

    Args:
        A: expression or matrix of expressions in the model variables.
        schedule: ascending blow-up sizes; default ``(s n - 1, s n)``.
        trials: random specializations per size.
        rng: integer seed or numpy Generator.
    """
    rows = _as_matrix(A)
    field_ = FpiField(prime)
    s = min(len(rows), len(rows[0]))
    sched = schedule or default_schedule(s * model.n)

    def sample(m, g):
        X, _ = evaluate_model(model, m, g, field_)
        return _evaluate_block(rows, X)

    return blowup_ranks(sample, [lambda M: M.rank()], sched, trials, rng)[0]


# ---------------------------------------------------------------------------
# von Neumann ranks and point spectra


@dataclass(frozen=True)
class EngineOptions:
    prime: int = DEFAULT_PRIME
    schedule: tuple[int, ...] | None = None
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    method: str = "direct"  # or "linear" (display pencil cross-check)
    max_resamples: int = MAX_RESAMPLES

    def __post_init__(self):
        if self.method not in ("direct", "linear"):
            raise ValueError("method must be 'direct' or 'linear'")


def _check_vars(exprs: Sequence[Expr], spec: MarginalSpec):
    used = max((max_variable(e) for e in exprs), default=0)
    if used > spec.d:
        raise SpecError(f"expression uses x{used} but the specification has {spec.d} variables")


def _shift(a: Scalar, R: Expr) -> Expr:
    return Sum(Const(a), Prod(Const(-ONE), R))


def _rank_reports(
    matrices: Sequence[list[list[Expr]]], spec: MarginalSpec, options: EngineOptions
) -> tuple[list[NcRankReport], list[int]]:
    """Inner-rank reports for several expression matrices over one model.

    Returns the reports and, per matrix, the offset to subtract (nonzero on
    the linear path, where the display adds ``dim * n`` to the rank).
    """
    model = build_model(spec)
    field_ = FpiField(options.prime)
    n = model.n
    if options.method == "direct":
        s = max(min(len(A), len(A[0])) for A in matrices)
        sched = options.schedule or default_schedule(s * n)

        def sample_eval(m, g):
            X, _ = evaluate_model(model, m, g, field_)
            return [_evaluate_block(A, X) for A in matrices]

        rankers = [(lambda st, j=j: st[j].rank()) for j in range(len(matrices))]
        reports = blowup_ranks(sample_eval, rankers, sched, options.trials, options.seed, options.max_resamples)
        return reports, [0] * len(matrices)

    # linear path: rank of the display pencil minus dim * n
    reps = []
    for A in matrices:
        if len(A) != 1 or len(A[0]) != 1:
            raise ValueError("the linear path handles single expressions only")
        reps.append(linearize(A[0][0]))
    s = 1
    sched = options.schedule or default_schedule(s * n)
    disp = [display(r) for r in reps]

    def sample_lin(m, g):
        X, _ = evaluate_model(model, m, g, field_)
        out = []
        for r, L in zip(reps, disp):
            Q = r.Q.evaluate(X, field_)
            if Q.rank() < Q.rows:
                raise SingularSubexpression(None, "pencil Q is singular at the sample")
            out.append(L.evaluate(X, field_))
        return out

    rankers = [(lambda st, j=j: st[j].rank()) for j in range(len(reps))]
    reports = blowup_ranks(sample_lin, rankers, sched, options.trials, options.seed, options.max_resamples)
    return reports, [r.dim * n for r in reps]


def vn_rank_report(R, spec: MarginalSpec, options: EngineOptions | None = None) -> tuple[Fraction, NcRankReport]:
    options = options or EngineOptions()
    A = _as_matrix(R)
    _check_vars([e for row in A for e in row], spec)
    try:
        (rep,), (off,) = _rank_reports([A], spec, options)
    except PersistentPole as exc:
        raise RNotDefinedAtFreeTuple(str(exc)) from None
    n = spec.n
    value = Fraction(rep.value - off, n)
    return value, rep


def vn_rank(R, spec: MarginalSpec, options: EngineOptions | None = None) -> Fraction:
    """von Neumann rank of ``R(X_1, ..., X_d)`` (normalized, in ``[0, s]``)."""
    return vn_rank_report(R, spec, options)[0]


@dataclass(frozen=True)
class SpectrumReport:
    measure: AtomicMeasure
    candidates: tuple[Scalar, ...]
    reports: tuple[NcRankReport, ...]
    n: int
    method: str

    @property
    def agreement(self) -> bool:
        return all(r.agreement for r in self.reports)

    @property
    def resamples(self) -> int:
        return max((r.resamples_due_to_poles for r in self.reports), default=0)

    @property
    def blowup_sizes(self) -> tuple[int, ...]:
        return self.reports[0].blowup_sizes_used if self.reports else ()


def analyze_point_spectrum(
    R: Expr,
    spec: MarginalSpec,
    candidates: Sequence | None = None,
    options: EngineOptions | None = None,
) -> SpectrumReport:
    """Point spectrum with the rank certificate of every candidate."""
    options = options or EngineOptions()
    _check_vars([R], spec)
    if candidates is None:
        cands = candidate_locations(R, spec, seed=options.seed)
    else:
        cands = sorted({Scalar.coerce(c) for c in candidates}, key=Scalar.sort_key)
    n = spec.n
    if not cands:
        return SpectrumReport(AtomicMeasure(), (), (), n, options.method)
    matrices = [[[_shift(a, R)]] for a in cands]
    try:
        reports, offsets = _rank_reports(matrices, spec, options)
    except PersistentPole as exc:
        raise RNotDefinedAtFreeTuple(str(exc)) from None
    atoms = {}
    for a, rep, off in zip(cands, reports, offsets):
        w = 1 - Fraction(rep.value - off, n)
        if w > 0:
            atoms[a] = w
    return SpectrumReport(AtomicMeasure.from_dict(atoms), tuple(cands), tuple(reports), n, options.method)


def point_spectrum(
    R: Expr,
    spec: MarginalSpec,
    candidates: Sequence | None = None,
    options: EngineOptions | None = None,
) -> AtomicMeasure:
    """Atoms of ``R(X_1, ..., X_d)`` located among the candidates.

    Each candidate ``a`` gets weight ``1 - vn_rank(a - R)``; zero weights are
    dropped.  All weights are multiples of ``1/spec.n``.
    """
    return analyze_point_spectrum(R, spec, candidates, options).measure


# ---------------------------------------------------------------------------
# candidates, divisibility, approximation


def candidate_locations(R: Expr, spec: MarginalSpec, seed: int = 0, generic: bool = True) -> list[Scalar]:
    """Commutative values of ``R`` on the grid of atom locations.

    A variable whose atoms carry total weight below 1 also gets a generic
    slot: ``R`` is evaluated at two random rationals there and the value is
    kept only when both agree (``R`` does not depend on that slot).  Points
    where ``R`` is undefined are skipped.
    """
    _check_vars([R], spec)
    rng = np.random.default_rng([int(seed), 7919])
    choices = []
    for measure in spec.measures:
        opts: list = list(measure.locations)
        if generic and measure.total < 1:
            opts.append(None)
        choices.append(opts)
    found = set()
    for combo in itertools.product(*choices):
        gen = [k for k, c in enumerate(combo) if c is None]
        if not gen:
            val = evaluate_commutative(R, combo)
        else:
            vals = []
            for _ in range(2):
                pt = list(combo)
                for k in gen:
                    pt[k] = Scalar(Fraction(int(rng.integers(10**6, 10**9)), int(rng.integers(1, 10**6))))
                vals.append(evaluate_commutative(R, pt))
            val = vals[0] if vals[0] is not None and vals[0] == vals[1] else None
        if val is not None:
            found.add(val)
    return sorted(found, key=Scalar.sort_key)


def divisibility_check(measure: AtomicMeasure, spec: MarginalSpec | Sequence[int]) -> bool:
    """True iff every weight is a multiple of ``1/lcm`` of the spec's denominators."""
    n = spec.n if isinstance(spec, MarginalSpec) else math.lcm(*spec)
    return all((w * n).denominator == 1 for w in measure.weights)


def _floor_weight(w, N: int) -> Fraction:
    if isinstance(w, Fraction):
        return Fraction(math.floor(w * N), N)
    if isinstance(w, int):
        return Fraction(w)
    if isinstance(w, float):
        return Fraction(math.floor(Fraction(w) * N), N)
    text = str(w).strip()
    try:
        return Fraction(math.floor(Fraction(text) * N), N)
    except ValueError:
        pass
    try:
        val = sympy.sympify(text, rational=True)
        k = sympy.floor(val * N)
        if not k.is_Integer:
            raise TypeError
    except (sympy.SympifyError, TypeError):
        raise SpecError(f"cannot interpret weight {w!r}") from None
    return Fraction(int(k), N)


def approximate_marginals(spec, N: int) -> MarginalSpec:
    """Round every weight down to a multiple of ``1/N`` and drop zero atoms.

    ``spec`` is a :class:`MarginalSpec` or its JSON form, where weights may
    also be decimal strings, floats or closed-form reals such as
    ``"sqrt(2)/2"``.  The result is pointwise below the input.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if isinstance(spec, MarginalSpec):
        raw = [
            (v.name, [(a, w) for a, w in v.measure], v.selfadjoint) for v in spec.variables
        ]
    else:
        raw = []
        for k, v in enumerate(spec["variables"]):
            atoms = [(location_from_json(a), a["weight"]) for a in v.get("atoms", [])]
            raw.append((str(v.get("name", f"x{k + 1}")), atoms, bool(v.get("selfadjoint", True))))
    out = []
    for name, atoms, sa in raw:
        kept = []
        for loc, w in atoms:
            fw = _floor_weight(w, N)
            if fw < 0:
                raise SpecError("negative weight")
            if fw > 0:
                kept.append((loc, fw))
        out.append(VariableMarginal(name, AtomicMeasure(tuple(kept)), sa))
    return MarginalSpec(tuple(out), approximation_level=N)
