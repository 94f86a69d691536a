"""Batch command-line front end; every command prints one JSON report.

Exit codes: 0 success, 1 expression syntax, 2 specification or input,
3 engine failure (persistent poles, singular samples), 4 closed-form
hypothesis not met, 5 validation mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import __version__
from . import closedforms as cf
from .errors import (
    DisconnectedGraph,
    DomainError,
    ExpressionSyntaxError,
    HypothesisNotMet,
    InsufficientSamples,
    PersistentPole,
    SingularSample,
    SpecError,
)
from .exactla import DEFAULT_PRIME
from .freemodel import EngineOptions, analyze_point_spectrum, approximate_marginals, vn_rank_report
from .measures import MarginalSpec
from .parser import parse_expression
from .scalar import Scalar

EXIT_OK, EXIT_PARSE, EXIT_SPEC, EXIT_ENGINE, EXIT_HYPOTHESIS, EXIT_MISMATCH = 0, 1, 2, 3, 4, 5


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _scalar_list(text: str) -> tuple[Scalar, ...]:
    return tuple(Scalar.parse(t.strip()) for t in text.split(",") if t.strip())


def _add_engine(p: argparse.ArgumentParser):
    p.add_argument("--prime", type=int, default=DEFAULT_PRIME, help="prime p = 3 mod 4 for F_p[i]")
    p.add_argument("--blowup", type=_int_list, default=None, help='blow-up sizes, e.g. "5,6"')
    p.add_argument("--trials", type=int, default=3, help="random specializations per size")
    p.add_argument("--method", choices=("direct", "linear"), default="direct")


def _add_common(p: argparse.ArgumentParser, expr: bool = True, marginals: bool = True):
    if expr:
        p.add_argument("-e", "--expr", required=True, help='expression, e.g. "x1*x2+x2*x1"')
    if marginals:
        p.add_argument("-m", "--marginals", required=True, help="marginal specification JSON file")
        p.add_argument("--approx-N", dest="approx_n", type=int, default=None,
                       help="round weights down to multiples of 1/N (allows decimal weights)")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ncatoms", description="Atoms of noncommutative rational expressions in free variables.")
    ap.add_argument("--version", action="version", version=f"ncatoms {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("atoms", help="exact point spectrum via the free-field engine")
    _add_common(p)
    _add_engine(p)
    p.add_argument("--candidates", type=_scalar_list, default=None, help='locations to test, e.g. "0,1,1/2"')

    p = sub.add_parser("rank", help="von Neumann rank of the expression")
    _add_common(p)
    _add_engine(p)

    p = sub.add_parser("closedform", help="closed-form atom formulas")
    p.add_argument("--rule", required=True, choices=("add", "mul", "commutator", "anticommutator", "multcomm", "injective"))
    p.add_argument("-e", "--expr", default=None, help="polynomial for --rule injective")
    p.add_argument("-m", "--marginals", required=True)
    p.add_argument("--approx-N", dest="approx_n", type=int, default=None)

    p = sub.add_parser("simulate", help="random-matrix Monte Carlo estimate")
    _add_common(p)
    p.add_argument("--size", type=int, default=600, help="matrix size")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--window", type=float, default=1e-6, help="clustering window relative to the spectral diameter")
    p.add_argument("--filler", choices=("grid", "semicircle"), default="grid")
    p.add_argument("--candidates", type=_scalar_list, default=None)

    p = sub.add_parser("cover", help="point spectrum of a graph's universal cover")
    p.add_argument("-g", "--graph", required=True, help='edge list file, one "u v" pair per line, 0-indexed')
    p.add_argument("--prime", type=int, default=DEFAULT_PRIME)
    p.add_argument("--blowup", type=_int_list, default=None)
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("validate", help="closed-form versus engine grids")
    from .suites import SUITES

    p.add_argument("--suite", required=True, choices=sorted(SUITES))
    p.add_argument("--seed", type=int, default=0)
    return ap


def _load_spec(args) -> MarginalSpec:
    try:
        with open(args.marginals, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read {args.marginals}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise SpecError(f"{args.marginals}: invalid JSON ({exc})") from None
    if args.approx_n is not None:
        return approximate_marginals(raw, args.approx_n)
    return MarginalSpec.from_json(raw)


def _options(args) -> EngineOptions:
    return EngineOptions(args.prime, args.blowup, args.trials, args.seed, args.method)


def _expr(args, spec: MarginalSpec | None):
    names = spec.names if spec is not None else None
    return parse_expression(args.expr, names if names and names != [f"x{k + 1}" for k in range(len(names))] else None)


def _cmd_atoms(args) -> tuple[dict, int]:
    spec = _load_spec(args)
    R = _expr(args, spec)
    opts = _options(args)
    rep = analyze_point_spectrum(R, spec, args.candidates, opts)
    out = {
        "atoms": rep.measure.to_json(),
        "spec": spec.to_json(),
        "provenance": {
            "engine": f"free-field blow-up ({opts.method})",
            "prime": opts.prime,
            "n": rep.n,
            "blowup_sizes": list(rep.blowup_sizes),
            "trials": opts.trials,
            "agreement": rep.agreement,
            "resamples_due_to_poles": rep.resamples,
            "approximation_level": spec.approximation_level,
            "candidates": [str(c) for c in rep.candidates],
        },
    }
    return out, EXIT_OK


def _cmd_rank(args) -> tuple[dict, int]:
    spec = _load_spec(args)
    R = _expr(args, spec)
    opts = _options(args)
    value, rep = vn_rank_report(R, spec, opts)
    out = {
        "rank": str(value),
        "spec": spec.to_json(),
        "provenance": {
            "engine": f"free-field blow-up ({opts.method})",
            "prime": opts.prime,
            "approximation_level": spec.approximation_level,
            **rep.to_json(),
        },
    }
    return out, EXIT_OK


_RULES = {
    "add": cf.additive_atoms,
    "mul": cf.multiplicative_atoms,
    "commutator": cf.commutator_atoms,
    "anticommutator": cf.anticommutator_atoms,
    "multcomm": cf.multiplicative_commutator_atoms,
}


def _cmd_closedform(args) -> tuple[dict, int]:
    spec = _load_spec(args)
    if spec.d != 2:
        raise SpecError("closed forms take exactly two variables")
    mu, nu = spec.measures
    if args.rule == "injective":
        if not args.expr:
            raise SpecError("--rule injective needs --expr")
        measure = cf.injective_polynomial_atoms(_expr(args, spec), mu, nu)
    else:
        measure = _RULES[args.rule](mu, nu)
    out = {
        "atoms": measure.to_json(),
        "spec": spec.to_json(),
        "provenance": {"engine": f"closed form ({args.rule})", "approximation_level": spec.approximation_level},
    }
    return out, EXIT_OK


def _cmd_simulate(args) -> tuple[dict, int]:
    from .randmat import SimConfig, estimate_atoms

    spec = _load_spec(args)
    R = _expr(args, spec)
    cfg = SimConfig(args.size, args.trials, args.window, args.seed, args.filler)
    rep = estimate_atoms(R, spec, cfg, args.candidates)
    out = rep.to_json()
    out["spec"] = spec.to_json()
    out["provenance"] = {
        "engine": "Monte Carlo (Haar-rotated diagonal models)",
        "window": args.window,
        "filler": args.filler,
        "seed": args.seed,
        "approximation_level": spec.approximation_level,
    }
    return out, EXIT_OK


def _cmd_cover(args) -> tuple[dict, int]:
    from .randmat import Graph, universal_cover_point_spectrum

    try:
        graph = Graph.load(args.graph)
    except OSError as exc:
        raise SpecError(f"cannot read {args.graph}: {exc.strerror}") from None
    except ValueError as exc:
        raise SpecError(str(exc)) from None
    rep = universal_cover_point_spectrum(graph, args.blowup, args.trials, args.seed, args.prime)
    out = rep.to_json()
    out["provenance"] = {"engine": "free-field blow-up over generic invertibles", "agreement": rep.agreement}
    return out, EXIT_OK


def _cmd_validate(args) -> tuple[dict, int]:
    from .suites import run_suite

    rep = run_suite(args.suite)
    return rep.to_json(), EXIT_OK if rep.ok else EXIT_MISMATCH


_COMMANDS = {
    "atoms": _cmd_atoms,
    "rank": _cmd_rank,
    "closedform": _cmd_closedform,
    "simulate": _cmd_simulate,
    "cover": _cmd_cover,
    "validate": _cmd_validate,
}


def _error(kind: str, exc: Exception, **extra) -> dict:
    return {"error": kind, "message": str(exc), **extra}


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    """Run one command; the JSON report goes to ``stdout``, errors to ``stderr``."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        report, code = _COMMANDS[args.command](args)
    except ExpressionSyntaxError as exc:
        report, code = _error("parse", exc, position=exc.position), EXIT_PARSE
    except (SpecError, DomainError, DisconnectedGraph) as exc:
        report, code = _error("spec", exc), EXIT_SPEC
    except (PersistentPole, SingularSample, InsufficientSamples) as exc:
        report, code = _error("engine", exc), EXIT_ENGINE
    except HypothesisNotMet as exc:
        report, code = _error("hypothesis", exc), EXIT_HYPOTHESIS
    text = json.dumps(report, indent=2)
    print(text, file=stdout if code in (EXIT_OK, EXIT_MISMATCH) else stderr)
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
