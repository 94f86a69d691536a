from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from ncatoms.errors import DisconnectedGraph, DomainError, SingularSample
from ncatoms.measures import AtomicMeasure, MarginalSpec
from ncatoms.parser import parse_expression
from ncatoms.randmat import (
    Graph,
    SimConfig,
    diagonal_model,
    estimate_atoms,
    kolmogorov_distance,
    kolmogorov_stability,
    perturb_spec,
    sample_haar_unitary,
    sample_model,
    universal_cover_point_spectrum,
)
from ncatoms.scalar import Scalar

half, third, quarter = Fraction(1, 2), Fraction(1, 3), Fraction(1, 4)


def test_config_validation():
    for bad in [dict(m=1), dict(trials=0), dict(window=0), dict(filler="uniform")]:
        with pytest.raises(ValueError):
            SimConfig(**bad)


def test_haar_unitary():
    rng = np.random.default_rng(0)
    m, trials = 60, 40
    traces = {1: [], 2: []}
    for _ in range(trials):
        U = sample_haar_unitary(m, rng)
        assert np.allclose(U @ U.conj().T, np.eye(m), atol=1e-10)
        assert abs(abs(np.linalg.det(U)) - 1) < 1e-8
        for k in traces:
            traces[k].append(np.trace(np.linalg.matrix_power(U, k)))
    # E tr U^k = 0 and E |tr U^k|^2 = k for Haar unitaries
    for k, vals in traces.items():
        assert abs(np.mean(vals)) < 3 * math.sqrt(k / trials)


def test_diagonal_model_counts():
    rng = np.random.default_rng(1)
    m = 50
    d = diagonal_model(AtomicMeasure.from_dict({0: third, 2: quarter}), m, rng)
    assert np.sum(d == 0) == math.floor(m / 3) and np.sum(d == 2) == math.floor(m / 4)
    filler = np.real(d[(d != 0) & (d != 2)])
    assert np.all((filler > 3) & (filler < 4)) and len(np.unique(filler)) == len(filler)
    semi = diagonal_model(AtomicMeasure.from_dict({0: half}), m, rng, "semicircle")
    assert np.sum(semi == 0) == 25 and np.all(np.real(semi[semi != 0]) > 1)


def test_sample_model_spectra():
    rng = np.random.default_rng(2)
    m = 40
    spec = MarginalSpec.of({0: 1}, {1: half, -1: Fraction(1, 4)})
    X, Y = sample_model(spec, m, rng)
    assert np.allclose(X, 0)
    assert np.allclose(Y, Y.conj().T)
    ev = np.linalg.eigvalsh(Y)
    assert np.sum(np.abs(ev - 1) < 1e-8) == 20 and np.sum(np.abs(ev + 1) < 1e-8) == 10


def test_estimate_single_variable():
    spec = MarginalSpec.of({0: half, 2: quarter})
    rep = estimate_atoms(parse_expression("x1"), spec, SimConfig(m=80, trials=2))
    assert rep.weight(0) == pytest.approx(0.5, abs=1 / 80)
    assert rep.weight(2) == pytest.approx(0.25, abs=1 / 80)
    assert rep.method == "eigenvalues"


def test_estimate_commutator_and_sum():
    cfg = SimConfig(m=200, trials=3)
    spec = MarginalSpec.of({0: half, 1: half}, {0: half, 1: half})
    rep = estimate_atoms(parse_expression("i*(x1*x2 - x2*x1)"), spec, cfg)
    assert rep.weight(0) <= 0.05
    spec = MarginalSpec.of({0: 2 * third, 1: third}, {0: 2 * third, 1: third})
    rep = estimate_atoms(parse_expression("x1 + x2"), spec, cfg)
    assert abs(rep.weight(0) - 1 / 3) <= 0.05
    assert rep.weight(2) <= 0.05


def test_estimate_non_hermitian_uses_singular_values():
    spec = MarginalSpec.of({0: 2 * third, 1: third}, {0: 2 * third, 1: third})
    rep = estimate_atoms(parse_expression("x1*x2"), spec, SimConfig(m=120, trials=2))
    assert rep.method == "singular values"
    # kernel of x1 x2 is ker x2 plus the part of ran x2 killed by x1: max(2/3, 2/3)
    assert abs(rep.weight(0) - 2 / 3) <= 0.05
    assert rep.weight(1) <= 0.05


def test_estimate_errors():
    spec = MarginalSpec.of({0: 2 * third, 1: third}, {0: 2 * third, 1: third})
    with pytest.raises(SingularSample):
        estimate_atoms(parse_expression("(x1 + x2)^-1"), spec, SimConfig(m=30, trials=1))
    with pytest.raises(DomainError):
        estimate_atoms(parse_expression("x3"), spec, SimConfig(m=30, trials=1))


def test_kolmogorov_distance():
    a = np.array([0.0, 1.0, 2.0, 3.0])
    assert kolmogorov_distance(a, a) == 0
    assert kolmogorov_distance(a, a + 10) == 1
    assert kolmogorov_distance(a, np.array([0.0, 1.0, 2.0, 30.0])) == pytest.approx(0.25)


def test_perturb_spec():
    spec = MarginalSpec.of({0: half, 1: Fraction(1, 100)})
    assert perturb_spec(spec, "1/50")[0] == AtomicMeasure.from_dict({0: Fraction(12, 25)})


def test_stability_zero_and_monotone():
    R = parse_expression("x1 + x2")
    spec = MarginalSpec.of({0: 2 * third, 1: third}, {0: 2 * third, 1: third})
    cfg = SimConfig(m=120, trials=3)
    r0 = kolmogorov_stability(R, spec, 0, cfg)
    assert r0.distance == 0 and r0.within_bound
    ds = [kolmogorov_stability(R, spec, e, cfg) for e in ("1/50", "1/10")]
    assert all(r.within_bound for r in ds)
    assert ds[0].distance <= ds[1].distance + 3 * ds[1].distance_stderr
    with pytest.raises(DomainError):
        kolmogorov_stability(parse_expression("x1*x2"), spec, 0, cfg)


# ---------------------------------------------------------------------------
# graphs and covers


def test_graph_validation(tmp_path):
    with pytest.raises(ValueError):
        Graph(2, ((0, 0),))
    with pytest.raises(ValueError):
        Graph(2, ((0, 1), (1, 0)))
    with pytest.raises(ValueError):
        Graph(2, ((0, 2),))
    with pytest.raises(DisconnectedGraph):
        Graph(4, ((0, 1), (2, 3)))
    path = tmp_path / "g.txt"
    path.write_text("# a triangle\n0 1\n1 2  # closing edge next\n2 0\n")
    g = Graph.load(str(path))
    assert g == Graph.complete(3) == Graph.cycle(3)
    g = Graph.random_connected(6, 0.4, np.random.default_rng(0))
    assert g.n == 6


def test_cover_k2():
    rep = universal_cover_point_spectrum(Graph.complete(2))
    assert rep.measure() == AtomicMeasure.from_dict({1: half, -1: half})
    assert rep.inequality_holds and rep.agreement


def test_cover_cycle_has_no_atoms():
    rep = universal_cover_point_spectrum(Graph.cycle(4))
    assert all(a.weight == 0 for a in rep.atoms) and rep.inequality_holds


def test_cover_of_tree_is_the_tree():
    # a tree is its own universal cover: every eigenvalue keeps weight 1/3
    rep = universal_cover_point_spectrum(Graph(3, ((0, 1), (1, 2))))
    assert rep.weight_at(0.0) == third
    assert rep.weight_at(math.sqrt(2), 1e-9) == third and rep.weight_at(-math.sqrt(2), 1e-9) == third
    assert rep.inequality_holds
    assert rep.measure() == AtomicMeasure.from_dict({Scalar(0): third})
