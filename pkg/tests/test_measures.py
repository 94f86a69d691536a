from __future__ import annotations

import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncatoms.errors import EmptySpec, SpecError
from ncatoms.measures import AtomicMeasure, MarginalSpec, location_from_json
from ncatoms.scalar import Scalar

half, third = Fraction(1, 2), Fraction(1, 3)


def test_validation():
    with pytest.raises(SpecError):
        AtomicMeasure.from_dict({0: half, 1: Fraction(2, 3)})
    with pytest.raises(SpecError):
        AtomicMeasure.from_dict({0: "-1/2"})
    with pytest.raises(SpecError):
        AtomicMeasure.from_dict({0: 0.5})
    with pytest.raises(SpecError):
        AtomicMeasure(((Scalar(0), half), (Scalar(0), third)))
    assert AtomicMeasure.from_dict({0: 0, 1: half}).locations == (Scalar(1),)


def test_sorted_and_queries():
    m = AtomicMeasure.from_dict({2: third, -1: third, Scalar(0, 1): third})
    assert m.locations == (Scalar(-1), Scalar(0, 1), Scalar(2))
    assert m.weight(5) == 0 and m[2] == third
    assert m.total == 1 and m.denominator() == 3
    assert not m.is_real()


def test_pushforward_merges_collisions():
    m = AtomicMeasure.from_dict({-1: third, 1: third, 2: third})
    assert m.pushforward(lambda a: a * a) == AtomicMeasure.from_dict({1: 2 * third, 4: third})
    assert m.translate(1) == AtomicMeasure.from_dict({0: third, 2: third, 3: third})


def test_leq():
    a = AtomicMeasure.from_dict({0: third})
    b = AtomicMeasure.from_dict({0: half, 1: half})
    assert a.leq(b) and not b.leq(a)
    assert not AtomicMeasure.from_dict({2: third}).leq(b)


def test_location_json_forms():
    assert location_from_json({"at": "1/2-i"}) == Scalar(half, -1)
    assert location_from_json({"re": "3", "im": "1/4"}) == Scalar(3, Fraction(1, 4))


def test_spec_json_round_trip():
    spec = MarginalSpec.of({0: half, Scalar(1, 1): third}, {}, names=["a", "b"], selfadjoint=[False, True])
    obj = json.loads(json.dumps(spec.to_json()))
    assert MarginalSpec.from_json(obj) == spec
    assert spec.n == 6 and spec.denominators() == [6, 1]


def test_spec_errors():
    with pytest.raises(EmptySpec):
        MarginalSpec.from_json({"variables": []})
    with pytest.raises(SpecError):
        MarginalSpec.from_json({})
    with pytest.raises(SpecError):
        MarginalSpec.of({Scalar(0, 1): half})  # selfadjoint with a non-real atom
    with pytest.raises(SpecError):
        MarginalSpec.from_json('{"variables": [{"atoms": [{"at": "0"}]}]}')
    with pytest.raises(SpecError):
        MarginalSpec.of({0: half}, {0: half}, names=["x", "x"])


def test_load(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text('{"variables": [{"atoms": [{"at": "0", "weight": "1/3"}]}]}')
    assert MarginalSpec.load(str(path))[0] == AtomicMeasure.from_dict({0: third})
    path.write_text("{")
    with pytest.raises(SpecError):
        MarginalSpec.load(str(path))


weights = st.lists(st.fractions(min_value=Fraction(1, 12), max_value=Fraction(1, 4), max_denominator=12), max_size=4)


@given(weights)
def test_measure_json_round_trip(ws):
    m = AtomicMeasure.from_dict({k: w for k, w in enumerate(ws)})
    assert AtomicMeasure.from_json(json.loads(json.dumps(m.to_json()))) == m
    assert m.total == sum(ws)
