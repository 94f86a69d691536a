"""Discrete sub-probability measures and per-variable marginal specifications."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import EmptySpec, SpecError
from .scalar import Scalar


def _weight(w) -> Fraction:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, int):
        return Fraction(w)
    if isinstance(w, str):
        try:
            return Fraction(w.strip())
        except ValueError:
            raise SpecError(f"weight {w!r} is not an exact rational; use approximate_marginals") from None
    if isinstance(w, float):
        raise SpecError("floating weights are not exact; pass fraction strings or use approximate_marginals")
    return Fraction(w)


def location_from_json(obj: Mapping) -> Scalar:
    """Atom location from ``{"at": "1/2-i"}`` or ``{"re": ..., "im": ...}``."""
    if "at" in obj:
        return Scalar.coerce(str(obj["at"]))
    return Scalar.from_json(obj)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finitely many atoms with exact rational weights in (0, 1], total <= 1.

    Atoms are kept sorted by location (real part, then imaginary part).
    The diffuse remainder ``1 - total`` is implicit and never inspected by
    the exact engine.
    """

    atoms: tuple[tuple[Scalar, Fraction], ...] = ()

    def __post_init__(self):
        clean = []
        seen = set()
        for loc, w in self.atoms:
            loc = Scalar.coerce(loc)
            w = _weight(w)
            if loc in seen:
                raise SpecError(f"duplicate atom location {loc}")
            if not (0 < w <= 1):
                raise SpecError(f"atom weight {w} at {loc} is outside (0, 1]")
            seen.add(loc)
            clean.append((loc, w))
        clean.sort(key=lambda a: a[0].sort_key())
        if sum((w for _, w in clean), Fraction(0)) > 1:
            raise SpecError("total atom weight exceeds 1")
        object.__setattr__(self, "atoms", tuple(clean))

    @classmethod
    def from_dict(cls, atoms: Mapping, drop_zero: bool = True) -> "AtomicMeasure":
        items = []
        for loc, w in atoms.items():
            w = _weight(w)
            if w == 0 and drop_zero:
                continue
            items.append((Scalar.coerce(loc), w))
        return cls(tuple(items))

    @classmethod
    def point(cls, loc, weight=1) -> "AtomicMeasure":
        return cls(((Scalar.coerce(loc), _weight(weight)),))

    def __iter__(self) -> Iterator[tuple[Scalar, Fraction]]:
        return iter(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __getitem__(self, loc) -> Fraction:
        return self.weight(loc)

    def weight(self, loc) -> Fraction:
        loc = Scalar.coerce(loc)
        for a, w in self.atoms:
            if a == loc:
                return w
        return Fraction(0)

    @property
    def locations(self) -> tuple[Scalar, ...]:
        return tuple(a for a, _ in self.atoms)

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return tuple(w for _, w in self.atoms)

    @property
    def total(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    @property
    def max_weight(self) -> Fraction:
        return max(self.weights, default=Fraction(0))

    def as_dict(self) -> dict[Scalar, Fraction]:
        return dict(self.atoms)

    def denominator(self) -> int:
        return math.lcm(*(w.denominator for w in self.weights)) if self.atoms else 1

    def is_real(self) -> bool:
        return all(a.is_real for a in self.locations)

    def leq(self, other: "AtomicMeasure") -> bool:
        """Pointwise comparison of atom weights."""
        return all(w <= other.weight(a) for a, w in self.atoms)

    def translate(self, c) -> "AtomicMeasure":
        c = Scalar.coerce(c)
        return AtomicMeasure(tuple((a + c, w) for a, w in self.atoms))

    def pushforward(self, f) -> "AtomicMeasure":
        """Image measure under ``f``; colliding atoms add up."""
        out: dict[Scalar, Fraction] = {}
        for a, w in self.atoms:
            b = Scalar.coerce(f(a))
            out[b] = out.get(b, Fraction(0)) + w
        return AtomicMeasure.from_dict(out)

    def to_json(self) -> list[dict]:
        return [{"at": str(a), "weight": str(w)} for a, w in self.atoms]

    @classmethod
    def from_json(cls, obj: Iterable[Mapping]) -> "AtomicMeasure":
        return cls(tuple((location_from_json(a), _weight(a["weight"])) for a in obj))

    def __str__(self) -> str:
        inner = ", ".join(f"{a}: {w}" for a, w in self.atoms)
        return "{" + inner + "}"


@dataclass(frozen=True)
class VariableMarginal:
    name: str
    measure: AtomicMeasure
    selfadjoint: bool = True


@dataclass(frozen=True)
class MarginalSpec:
    """Atomic parts of the marginals of ``x1, ..., xd`` plus selfadjoint flags."""

    variables: tuple[VariableMarginal, ...]
    approximation_level: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.variables:
            raise EmptySpec("a marginal specification needs at least one variable")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise SpecError("variable names must be distinct")
        for v in self.variables:
            if v.selfadjoint and not v.measure.is_real():
                raise SpecError(f"selfadjoint variable {v.name} has a non-real atom")

    @classmethod
    def of(cls, *measures, names: Sequence[str] | None = None, selfadjoint: bool | Sequence[bool] = True):
        """Shorthand: ``MarginalSpec.of({0: "1/2", 1: "1/2"}, {0: "1/3"})``."""
        ms = [m if isinstance(m, AtomicMeasure) else AtomicMeasure.from_dict(m) for m in measures]
        names = list(names) if names is not None else [f"x{k + 1}" for k in range(len(ms))]
        flags = [selfadjoint] * len(ms) if isinstance(selfadjoint, bool) else list(selfadjoint)
        return cls(tuple(VariableMarginal(nm, m, f) for nm, m, f in zip(names, ms, flags)))

    @property
    def d(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    @property
    def measures(self) -> list[AtomicMeasure]:
        return [v.measure for v in self.variables]

    def __getitem__(self, k: int) -> AtomicMeasure:
        return self.variables[k].measure

    @property
    def n(self) -> int:
        """Least common multiple of all atom-weight denominators."""
        return math.lcm(*(m.denominator() for m in self.measures))

    def denominators(self) -> list[int]:
        return [m.denominator() for m in self.measures]

    def leq(self, other: "MarginalSpec") -> bool:
        return self.d == other.d and all(a.leq(b) for a, b in zip(self.measures, other.measures))

    def to_json(self) -> dict:
        out = {
            "variables": [
                {"name": v.name, "atoms": v.measure.to_json(), "selfadjoint": v.selfadjoint} for v in self.variables
            ]
        }
        if self.approximation_level is not None:
            out["approximation_level"] = self.approximation_level
        return out

    @classmethod
    def from_json(cls, obj: Mapping | str) -> "MarginalSpec":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            entries = obj["variables"]
        except (KeyError, TypeError):
            raise SpecError("marginal specification must have a 'variables' list") from None
        out = []
        for k, v in enumerate(entries):
            try:
                measure = AtomicMeasure.from_json(v.get("atoms", []))
            except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
                if isinstance(exc, SpecError):
                    raise
                raise SpecError(f"bad atom entry for variable {k + 1}: {exc}") from None
            out.append(VariableMarginal(str(v.get("name", f"x{k + 1}")), measure, bool(v.get("selfadjoint", True))))
        return cls(tuple(out), obj.get("approximation_level"))

    @classmethod
    def load(cls, path: str) -> "MarginalSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_json(json.load(fh))
            except json.JSONDecodeError as exc:
                raise SpecError(f"{path}: invalid JSON ({exc})") from None
