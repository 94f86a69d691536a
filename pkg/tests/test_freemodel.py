from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncatoms.errors import EmptySpec, RNotDefinedAtFreeTuple, SpecError
from ncatoms.exactla import FpiField, FpiMatrix
from ncatoms.freemodel import (
    EngineOptions,
    analyze_point_spectrum,
    approximate_marginals,
    build_model,
    candidate_locations,
    default_schedule,
    divisibility_check,
    evaluate_model,
    ncrank,
    point_spectrum,
    vn_rank,
    vn_rank_report,
)
from ncatoms.measures import AtomicMeasure, MarginalSpec
from ncatoms.closedforms import lower_bound_unavoidable
from ncatoms.ncexpr import Const, Prod, Sum, Var, evaluate_commutative
from ncatoms.parser import parse_expression
from ncatoms.scalar import Scalar
from ncatoms.suites import random_polynomial, random_spec, smaller_spec

F = FpiField()
half, third, quarter = Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)


def _spec(*ms, **kw):
    return MarginalSpec.of(*ms, **kw)


# ---------------------------------------------------------------------------
# model


def test_intro_model():
    model = build_model(_spec({1: third, 2: third}))
    assert model.n == 3
    diag = model.diagonals[0]
    assert [s.atom for s in diag[:2]] == [Scalar(1), Scalar(2)]
    assert not diag[2].is_atom
    assert len(model.grids[0]) == 3 and all(len(r) == 3 for r in model.grids[0])


def test_pure_atom_model_is_scalar():
    model = build_model(_spec({0: 1}))
    assert model.n == 1
    (X,), _ = evaluate_model(model, 4, np.random.default_rng(0), F)
    assert X.is_zero()
    model = build_model(_spec({Fraction(5, 2): 1}))
    (X,), _ = evaluate_model(model, 3, np.random.default_rng(0), F)
    assert X == FpiMatrix.identity(3, F).scale(Scalar(Fraction(5, 2)))


def test_lcm_and_fresh_symbols():
    model = build_model(_spec({0: half, 1: half}, {0: third}))
    assert model.n == 6
    syms = model.symbols
    assert len(syms) == len(set(syms))
    with pytest.raises(EmptySpec):
        MarginalSpec(())


def test_eigenspace_dimensions():
    model = build_model(_spec({1: third, 2: third}))
    m = 4
    (X,), _ = evaluate_model(model, m, np.random.default_rng(2), F)
    eye = FpiMatrix.identity(3 * m, F)
    assert (X - eye).rank() == 2 * m
    assert (X - eye.scale(Scalar(2))).rank() == 2 * m
    # no atom at 0 and a generic diffuse block: X is invertible
    assert X.rank() == 3 * m


# ---------------------------------------------------------------------------
# ncrank


def _diffuse(d: int) -> MarginalSpec:
    return MarginalSpec.of(*({} for _ in range(d)))


def test_identity_rank():
    model = build_model(_diffuse(1))
    one, zero = Const(Scalar(1)), Const(Scalar(0))
    rep = ncrank([[one, zero], [zero, one]], model)
    assert rep.value == 2 and rep.agreement


def test_skew_symmetric_pencil_is_full():
    z1, z2, z3 = Var(1), Var(2), Var(3)
    neg = lambda e: Prod(Const(Scalar(-1)), e)  # noqa: E731
    zero = Const(Scalar(0))
    A = [[zero, z1, z2], [neg(z1), zero, z3], [neg(z2), neg(z3), zero]]
    model = build_model(_diffuse(3))
    assert ncrank(A, model, schedule=(1,), trials=5).value == 2
    rep = ncrank(A, model)
    assert rep.value == 3 and rep.agreement
    assert rep.blowup_sizes_used == default_schedule(3)


def test_outer_product_pencil():
    z = [Var(k) for k in range(1, 5)]
    A = [[Prod(z[0], z[2]), Prod(z[0], z[3])], [Prod(z[1], z[2]), Prod(z[1], z[3])]]
    rep = ncrank(A, build_model(_diffuse(4)))
    assert rep.value == 1 and rep.agreement


def test_estimates_never_exceed_value():
    spec = _spec({0: half, 1: half}, {0: half, 1: half})
    _, rep = vn_rank_report(parse_expression("x1*x2 + x2*x1"), spec)
    assert all(max(v) <= rep.value for v in rep.estimates.values())


# ---------------------------------------------------------------------------
# von Neumann ranks and point spectra


def test_vn_rank_examples():
    assert vn_rank(Var(1), _spec({0: half, 1: half})) == half
    s = _spec({0: Fraction(2, 3), 1: third}, {0: Fraction(2, 3), 1: third})
    assert vn_rank(parse_expression("x1 + x2"), s) == Fraction(2, 3)
    s = _spec({0: half, 1: half}, {0: half, 1: half})
    assert vn_rank(parse_expression("i*(x1*x2 - x2*x1)"), s) == 1


def test_point_spectrum_examples():
    s = _spec({0: Fraction(3, 4), 1: quarter}, {0: Fraction(3, 4), 1: quarter})
    assert point_spectrum(parse_expression("x1*x2 + x2*x1"), s) == AtomicMeasure.from_dict({0: half})
    mu = AtomicMeasure.from_dict({0: half, 2: half})
    assert point_spectrum(Var(1), _spec(mu)) == mu
    s = _spec({0: half, 2: half}, {0: half, 1: half})
    assert point_spectrum(parse_expression("x1*x2*x1"), s) == AtomicMeasure.from_dict({0: half})


def test_linear_path_agrees_with_direct():
    s = _spec({0: half, 1: half}, {0: third, 2: third})
    for text in ["x1 + x2", "x1*x2*x1", "x1*x2 + x2*x1 - x1"]:
        R = parse_expression(text)
        direct = point_spectrum(R, s)
        linear = point_spectrum(R, s, options=EngineOptions(method="linear"))
        assert direct == linear


def test_undefined_at_free_tuple():
    s = _spec({0: Fraction(2, 3), 1: third}, {0: Fraction(2, 3), 1: third})
    with pytest.raises(RNotDefinedAtFreeTuple):
        vn_rank(parse_expression("(x1 + x2)^-1"), s)


def test_rational_expression_with_candidates_override():
    s = _spec({1: half, 2: half}, {1: 1})
    R = parse_expression("x1*x2^-2*x1 + x2*x1^-2*x2")
    assert candidate_locations(R, s) == [Scalar(2), Scalar(Fraction(17, 4))]
    rep = analyze_point_spectrum(R, s, candidates=[2, Fraction(17, 4)])
    assert rep.agreement
    # x2 = 1 makes R = x1^2 + x1^-2, so the law is the pushforward of x1
    assert rep.measure == AtomicMeasure.from_dict({2: half, Fraction(17, 4): half})


def test_candidate_locations_examples():
    s = _spec({0: half, 1: half}, {0: half, 2: half})
    assert candidate_locations(parse_expression("x1 + x2"), s) == [Scalar(k) for k in (0, 1, 2, 3)]
    assert candidate_locations(parse_expression("i*(x1*x2 - x2*x1)"), s) == [Scalar(0)]


def test_generic_slot_candidates():
    # x1 is purely diffuse: only its generic slot contributes
    s = _spec({}, {2: 1})
    assert candidate_locations(parse_expression("x2 + 1"), s) == [Scalar(3)]
    assert candidate_locations(parse_expression("x2 + 1"), s, generic=False) == []
    # a value that moves with the generic slot is not a candidate
    assert candidate_locations(parse_expression("x1*x2"), s) == []
    assert point_spectrum(parse_expression("x2 + 1"), s) == AtomicMeasure.from_dict({3: 1})


def test_divisibility_examples():
    assert divisibility_check(AtomicMeasure.from_dict({0: Fraction(1, 6)}), [2, 3])
    assert not divisibility_check(AtomicMeasure.from_dict({0: quarter}), [2, 3])


def test_spec_variable_count_checked():
    with pytest.raises(SpecError):
        point_spectrum(parse_expression("x1 + x3"), _spec({0: half}, {0: half}))


# ---------------------------------------------------------------------------
# approximation


def test_approximate_marginals_examples():
    spec = approximate_marginals(_spec({0: third}), 10)
    assert spec[0].weight(0) == Fraction(3, 10)
    assert spec.approximation_level == 10
    exact = _spec({0: Fraction(3, 10)})
    assert approximate_marginals(exact, 10) == exact
    raw = {"variables": [{"atoms": [{"at": "0", "weight": "sqrt(2)/2"}, {"at": "1", "weight": 0.01}]}]}
    approx = approximate_marginals(raw, 12)
    assert approx[0] == AtomicMeasure.from_dict({0: Fraction(8, 12)})


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 40))
def test_approximation_is_pointwise_smaller(seed, N):
    spec = random_spec(np.random.default_rng(seed))
    approx = approximate_marginals(spec, N)
    assert approx.leq(spec)
    assert all((w * N).denominator == 1 for m in approx.measures for w in m.weights)


# ---------------------------------------------------------------------------
# properties over random inputs


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2**31))
def test_weights_are_quantized(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, max_denominator=4)
    R = random_polynomial(rng, max_degree=3)
    rep = analyze_point_spectrum(R, spec)
    assert divisibility_check(rep.measure, spec)
    assert rep.measure.total <= 1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_monotone_in_marginals(seed):
    rng = np.random.default_rng(seed)
    big = random_spec(rng, locations=(0, 1), max_denominator=4)
    small = smaller_spec(rng, big)
    R = random_polynomial(rng, max_degree=3)
    cands = sorted(set(candidate_locations(R, big)) | set(candidate_locations(R, small)), key=Scalar.sort_key)
    assert point_spectrum(R, small, cands).leq(point_spectrum(R, big, cands))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31))
def test_unavoidable_lower_bound(seed):
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, locations=(0, 1, 2), max_denominator=4)
    R = random_polynomial(rng, max_degree=3)
    got = point_spectrum(R, spec)
    (mu, nu) = spec.measures
    for (a, s), (b, t) in ((x, y) for x in mu for y in nu):
        value = evaluate_commutative(R, [a, b])
        assert got.weight(value) >= lower_bound_unavoidable([a, b], [s, t])


def test_sum_node_direct_translation():
    # a - R for the constant-shift used internally keeps ranks consistent
    s = _spec({0: half, 1: half})
    R = Sum(Var(1), Const(Scalar(3)))
    assert point_spectrum(R, s) == AtomicMeasure.from_dict({3: half, 4: half})
