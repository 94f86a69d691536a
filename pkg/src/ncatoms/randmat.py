"""Random-matrix Monte Carlo and the universal-cover application.

Floating-point simulation lives here and nowhere else: Haar-rotated
diagonal models of the marginals, empirical atom weights by eigenvalue
clustering, and a Kolmogorov-distance stability check.  The universal-cover
computation, although it sits here, is exact: it runs the F_p[i] blow-up
engine on generic invertible matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import networkx as nx
import numpy as np
import sympy

from .errors import DisconnectedGraph, DomainError, SingularSample, SingularSubexpression
from .exactla import DEFAULT_PRIME, FpiField, FpiMatrix, random_invertible
from .freemodel import MAX_RESAMPLES, NcRankReport, blowup_ranks, candidate_locations, default_schedule
from .linrep import linearize
from .measures import AtomicMeasure, MarginalSpec, VariableMarginal
from .ncexpr import Expr, evaluate_matrix, is_selfadjoint, max_variable
from .scalar import Scalar


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings; ``window`` is relative to the spectral diameter."""

    m: int = 600
    trials: int = 10
    window: float = 1e-6
    seed: int = 0
    filler: str = "grid"  # or "semicircle"

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("matrix size must be >= 2")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.window > 0:
            raise ValueError("window must be positive")
        if self.filler not in ("grid", "semicircle"):
            raise ValueError("filler must be 'grid' or 'semicircle'")


def sample_haar_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary from the QR factorization of a complex Ginibre matrix."""
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _filler(count: int, lo: float, rng: np.random.Generator, kind: str) -> np.ndarray:
    if count <= 0:
        return np.zeros(0)
    if kind == "grid":
        return lo + (np.arange(count) + 0.5) / count
    # semicircle on [lo, lo + 1]: Beta(3/2, 3/2) rescaled
    return lo + rng.beta(1.5, 1.5, size=count)


def diagonal_model(measure: AtomicMeasure, m: int, rng: np.random.Generator, filler: str = "grid") -> np.ndarray:
    """Eigenvalues: ``floor(m w)`` copies of each atom, then atomless filler."""
    vals = []
    for a, w in measure:
        vals.extend([a.to_complex()] * math.floor(m * w))
    top = max((a.re for a in measure.locations), default=Fraction(0))
    fill = _filler(m - len(vals), float(top) + 1.0, rng, filler)
    out = np.concatenate([np.asarray(vals, dtype=complex), fill.astype(complex)])
    return out


def sample_model(
    spec: MarginalSpec, m: int, rng: np.random.Generator, filler: str = "grid"
) -> list[np.ndarray]:
    """One Haar-rotated diagonal matrix per variable, with independent rotations."""
    out = []
    for v in spec.variables:
        d = diagonal_model(v.measure, m, rng, filler)
        U = sample_haar_unitary(m, rng)
        X = (U * d) @ U.conj().T
        if v.selfadjoint:
            X = (X + X.conj().T) / 2
        out.append(X)
    return out


@dataclass(frozen=True)
class AtomEstimate:
    location: Scalar
    weight: float
    stderr: float
    trials: int

    def to_json(self) -> dict:
        return {"at": str(self.location), "weight": self.weight, "stderr": self.stderr, "trials": self.trials}


@dataclass(frozen=True)
class MonteCarloReport:
    estimates: tuple[AtomEstimate, ...]
    m: int
    trials: int
    method: str
    resamples: int = 0

    def weight(self, loc) -> float:
        loc = Scalar.coerce(loc)
        for e in self.estimates:
            if e.location == loc:
                return e.weight
        return 0.0

    def as_dict(self) -> dict[Scalar, float]:
        return {e.location: e.weight for e in self.estimates}

    def to_json(self) -> dict:
        return {
            "m": self.m,
            "trials": self.trials,
            "method": self.method,
            "resamples": self.resamples,
            "atoms": [e.to_json() for e in self.estimates],
        }


def _evaluate_float(R: Expr, X: Sequence[np.ndarray]) -> np.ndarray:
    try:
        return evaluate_matrix(R, list(X))
    except SingularSubexpression as exc:
        raise SingularSample("inverse node numerically singular") from exc


def _sample_values(R: Expr, spec: MarginalSpec, config: SimConfig, rng, filler: str):
    for _ in range(MAX_RESAMPLES + 1):
        X = sample_model(spec, config.m, rng, filler)
        try:
            return X, _evaluate_float(R, X), 0
        except SingularSample:
            continue
    raise SingularSample(f"{MAX_RESAMPLES} consecutive samples were numerically singular")


def _hermitian_mode(R: Expr, spec: MarginalSpec) -> bool:
    return all(v.selfadjoint for v in spec.variables) and is_selfadjoint(R)


def _kernel_counts(Z: np.ndarray, cands: Sequence[Scalar], hermitian: bool, window: float) -> list[int]:
    if hermitian:
        ev = np.linalg.eigvalsh((Z + Z.conj().T) / 2)
        delta = window * max(ev[-1] - ev[0], 1.0)
        return [int(np.count_nonzero(np.abs(ev - float(a.re)) <= delta)) for a in cands]
    scale = max(np.linalg.norm(Z, 2), 1.0)
    delta = window * 2 * scale
    eye = np.eye(Z.shape[0])
    out = []
    for a in cands:
        sv = np.linalg.svd(a.to_complex() * eye - Z, compute_uv=False)
        out.append(int(np.count_nonzero(sv <= delta)))
    return out


def estimate_atoms(
    R: Expr,
    spec: MarginalSpec,
    config: SimConfig | None = None,
    candidates: Sequence | None = None,
) -> MonteCarloReport:
    """Empirical atom weights of ``R`` on Haar-rotated finite models.

    Selfadjoint ``R`` (formal adjoint check) with selfadjoint marginals uses
    eigenvalue clustering; anything else counts small singular values of
    ``a - R`` per candidate ``a``.
    """
    config = config or SimConfig()
    if max_variable(R) > spec.d:
        raise DomainError("expression uses more variables than the specification")
    cands = (
        candidate_locations(R, spec, seed=config.seed)
        if candidates is None
        else sorted({Scalar.coerce(c) for c in candidates}, key=Scalar.sort_key)
    )
    herm = _hermitian_mode(R, spec)
    counts = np.zeros((config.trials, len(cands)))
    resamples = 0
    for t in range(config.trials):
        rng = np.random.default_rng([config.seed, t])
        _, Z, r = _sample_values(R, spec, config, rng, config.filler)
        resamples += r
        counts[t] = _kernel_counts(Z, cands, herm, config.window)
    w = counts / config.m
    mean = w.mean(axis=0) if len(cands) else np.zeros(0)
    se = (w.std(axis=0, ddof=1) / math.sqrt(config.trials)) if config.trials > 1 else np.zeros(len(cands))
    est = tuple(AtomEstimate(a, float(mu), float(s), config.trials) for a, mu, s in zip(cands, mean, se))
    return MonteCarloReport(est, config.m, config.trials, "eigenvalues" if herm else "singular values", resamples)


# ---------------------------------------------------------------------------
# Kolmogorov stability


def perturb_spec(spec: MarginalSpec, eps) -> MarginalSpec:
    """Move mass ``eps`` off every atom (into the diffuse part)."""
    eps = Fraction(eps)
    out = []
    for v in spec.variables:
        atoms = tuple((a, w - eps) for a, w in v.measure if w - eps > 0)
        out.append(VariableMarginal(v.name, AtomicMeasure(atoms), v.selfadjoint))
    return MarginalSpec(tuple(out))


def kolmogorov_distance(a: np.ndarray, b: np.ndarray) -> float:
    """sup |F_a - F_b| for two empirical distributions on the real line."""
    a, b = np.sort(np.real(a)), np.sort(np.real(b))
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / len(a)
    fb = np.searchsorted(b, grid, side="right") / len(b)
    return float(np.max(np.abs(fa - fb))) if len(grid) else 0.0


@dataclass(frozen=True)
class StabilityReport:
    eps: float
    distance: float
    distance_stderr: float
    marginal_distance: float
    constant: int
    bound: float
    within_bound: bool
    trials: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def kolmogorov_stability(R: Expr, spec: MarginalSpec, eps, config: SimConfig | None = None) -> StabilityReport:
    """Compare spectra of ``R`` for ``spec`` and the ``eps``-perturbed spec.

    Both runs share their random numbers, so the two tuples differ only
    in the moved diagonal entries.  The bound is ``c eps`` with
    ``c = n d``, ``n`` the linearization dimension; it holds when the
    distance is at most ``c eps + 3 stderr``.  The largest marginal
    Kolmogorov distance is reported alongside.
    """
    config = config or SimConfig()
    if not _hermitian_mode(R, spec):
        raise DomainError("Kolmogorov distance needs a selfadjoint expression and selfadjoint marginals")
    eps = Fraction(eps)
    pert = perturb_spec(spec, eps)
    n_rep = linearize(R).dim
    dists, margs = [], []
    for t in range(config.trials):
        seed = [config.seed, t, 99]
        _, Z1, _ = _sample_values(R, spec, config, np.random.default_rng(seed), config.filler)
        _, Z2, _ = _sample_values(R, pert, config, np.random.default_rng(seed), config.filler)
        dists.append(kolmogorov_distance(np.linalg.eigvalsh(Z1), np.linalg.eigvalsh(Z2)))
        md = 0.0
        for v1, v2 in zip(spec.variables, pert.variables):
            d1 = diagonal_model(v1.measure, config.m, np.random.default_rng(seed), config.filler)
            d2 = diagonal_model(v2.measure, config.m, np.random.default_rng(seed), config.filler)
            md = max(md, kolmogorov_distance(d1, d2))
        margs.append(md)
    dist = float(np.mean(dists))
    se = float(np.std(dists, ddof=1) / math.sqrt(len(dists))) if len(dists) > 1 else 0.0
    delta = float(np.max(margs))
    c = n_rep * spec.d
    bound = c * float(eps)
    return StabilityReport(float(eps), dist, se, delta, c, bound, dist <= bound + 3 * se, config.trials)


# ---------------------------------------------------------------------------
# universal covers


@dataclass(frozen=True)
class Graph:
    """Finite simple undirected connected graph on vertices ``0..n-1``."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        clean = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) outside 0..{self.n - 1}")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"repeated edge {key}")
            seen.add(key)
            clean.append(key)
        object.__setattr__(self, "edges", tuple(sorted(clean)))
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        if self.n == 0 or not nx.is_connected(g):
            raise DisconnectedGraph("graph must be nonempty and connected")

    @classmethod
    def from_edge_list(cls, text: str, n: int | None = None) -> "Graph":
        edges = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"line {lineno}: expected 'u v'")
            edges.append((int(parts[0]), int(parts[1])))
        size = n if n is not None else 1 + max((max(e) for e in edges), default=0)
        return cls(size, tuple(edges))

    @classmethod
    def load(cls, path: str) -> "Graph":
        with open(path, encoding="utf-8") as fh:
            return cls.from_edge_list(fh.read())

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n, self.n), dtype=int)
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1
        return A

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        return cls(n, tuple((k, (k + 1) % n) for k in range(n)))

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def random_connected(cls, n: int, p: float, rng: np.random.Generator) -> "Graph":
        while True:
            g = nx.gnp_random_graph(n, p, seed=int(rng.integers(0, 2**31 - 1)))
            if nx.is_connected(g):
                return cls(n, tuple(g.edges()))


@dataclass(frozen=True)
class CoverAtom:
    """Eigenvalue class of ``A(G)``: one irreducible factor of the characteristic polynomial."""

    factor: str
    rational: Scalar | None
    roots: tuple[float, ...]
    multiplicity: int
    weight: Fraction
    within_bound: bool
    prime: int
    report: NcRankReport

    def to_json(self) -> dict:
        return {
            "factor": self.factor,
            "at": None if self.rational is None else str(self.rational),
            "roots": list(self.roots),
            "multiplicity": self.multiplicity,
            "weight": str(self.weight),
            "within_bound": self.within_bound,
            "prime": self.prime,
            "agreement": self.report.agreement,
        }


@dataclass(frozen=True)
class CoverReport:
    graph: Graph
    atoms: tuple[CoverAtom, ...]

    @property
    def inequality_holds(self) -> bool:
        return all(a.within_bound for a in self.atoms)

    @property
    def agreement(self) -> bool:
        return all(a.report.agreement for a in self.atoms)

    def weight_at(self, value: float, tol: float = 1e-9) -> Fraction:
        for a in self.atoms:
            if any(abs(r - value) <= tol for r in a.roots):
                return a.weight
        return Fraction(0)

    def measure(self) -> AtomicMeasure:
        """Rational atoms only (irrational eigenvalues cannot be Scalars)."""
        out = {}
        for a in self.atoms:
            if a.rational is not None and a.weight > 0:
                out[a.rational] = a.weight
        return AtomicMeasure.from_dict(out)

    def to_json(self) -> dict:
        return {
            "vertices": self.graph.n,
            "edges": [list(e) for e in self.graph.edges],
            "inequality_holds": self.inequality_holds,
            "atoms": [a.to_json() for a in self.atoms],
        }


def _primes_3mod4(start: int):
    p = start
    while p > 3:
        p = sympy.prevprime(p)
        if p % 4 == 3:
            yield p


def _root_mod_p(f: sympy.Poly, start: int) -> tuple[int, int]:
    """A prime ``p = 3 (mod 4)`` and a root of ``f`` modulo ``p``."""
    x = f.gens[0]
    coeffs = [int(c) for c in f.all_coeffs()]
    for p in _primes_3mod4(start):
        if coeffs[0] % p == 0:
            continue
        g = sympy.Poly(coeffs, x, modulus=p)
        for fac, _ in g.factor_list()[1]:
            if fac.degree() == 1:
                a, b = (int(c) % p for c in fac.all_coeffs())
                return p, (-b * pow(a, p - 2, p)) % p
    raise RuntimeError("no suitable prime found")  # pragma: no cover


def _cover_sampler(graph: Graph, field: FpiField):
    n = graph.n

    def sample(m, rng):
        blocks = [[FpiMatrix.zeros(m, m, field) for _ in range(n)] for _ in range(n)]
        for j, i in graph.edges:  # j < i
            U, Uinv, _ = random_invertible(m, rng, field)
            blocks[i][j] = U
            blocks[j][i] = Uinv
        return FpiMatrix.block(blocks)

    return sample


def universal_cover_point_spectrum(
    graph: Graph,
    schedule: Sequence[int] | None = None,
    trials: int = 3,
    seed: int = 0,
    prime: int = DEFAULT_PRIME,
) -> CoverReport:
    """Atoms of the universal cover's spectral measure, one per eigenvalue class.

    Each edge ``{i > j}`` gets a fresh generic invertible block ``u`` at
    ``(i, j)`` and its exact inverse at ``(j, i)``; the weight at ``l`` is
    ``1 - rank(l I - R(A)) / |V|``.  Irrational eigenvalues are handled
    through a prime where their minimal polynomial has a root.
    """
    x = sympy.Symbol("x")
    A = sympy.Matrix(graph.adjacency())
    charpoly = A.charpoly(x)
    _, factors = sympy.factor_list(charpoly.as_expr(), x)
    sched = tuple(schedule) if schedule else default_schedule(graph.n)
    atoms = []
    for fexpr, mult in sorted(factors, key=lambda fm: (sympy.Poly(fm[0], x).degree(), str(fm[0]))):
        f = sympy.Poly(fexpr, x)
        rational = None
        if f.degree() == 1:
            c1, c0 = f.all_coeffs()
            root = Fraction(int(-c0), int(c1))
            rational = Scalar(root)
            p = prime
            field = FpiField(p)
            lam = field.embed(Scalar(root))
        else:
            p, r = _root_mod_p(f, prime + 1 if prime < 2**31 else 2**31)
            field = FpiField(p)
            lam = field.element(r)
        sample = _cover_sampler(graph, field)

        def rk(M, lam=lam, field=field):
            return (FpiMatrix.identity(M.rows, field).scale(lam) - M).rank()

        rep = blowup_ranks(sample, [rk], sched, trials, seed)[0]
        weight = 1 - Fraction(rep.value, graph.n)
        roots = tuple(sorted(float(sympy.re(z)) for z in sympy.Poly(fexpr, x).nroots()))
        atoms.append(
            CoverAtom(
                str(fexpr),
                rational,
                roots,
                int(mult),
                weight,
                weight <= Fraction(int(mult), graph.n),
                p,
                rep,
            )
        )
    return CoverReport(graph, tuple(atoms))
