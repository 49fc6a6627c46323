"""Command-line entry point: generate, factorize, lift, verify and fixtures."""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import filtration as filt
from . import fixtures
from . import twistor as tw
from . import verify
from .bundle import DEFAULT_SEED, FD_TOL, SPAN_TOL
from .errors import CapacityError, ContractError, DomainError, NotNormalizedError, PoleError, TwistorLiftError
from .grassmodel import (
    GrassModel,
    osculating_filtration,
    segal_filtration,
    symmetry_predicates,
    uhlenbeck_filtration,
)

PIPELINES = ("canonical", "burstall", "strongly-conformal", "uniton-anchored", "real-ocs")
FACTORIZATIONS = {"segal": segal_filtration, "uhlenbeck": uhlenbeck_filtration, "osculating": osculating_filtration}


class InputError(Exception):
    pass


def _threads():
    raw = os.environ.get("TWISTORLIFT_THREADS", "1")
    try:
        value = int(raw)
    except ValueError:
        raise InputError(f"TWISTORLIFT_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise InputError("TWISTORLIFT_THREADS must be at least 1")
    return value


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise InputError(f"no such file: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None


def _model_from(obj):
    if isinstance(obj, dict) and "model" in obj and "schema" not in obj:
        obj = obj["model"]
    return GrassModel.from_json(obj)


def _source(args):
    """``(fixture_name, model, analytic_map)`` from ``--fixture`` or an input file."""
    if getattr(args, "fixture", None):
        fx = fixtures.get(args.fixture)
        return fx.name, fx.model, fx.analytic
    if not args.input:
        raise InputError("give an input file or --fixture NAME")
    return None, _model_from(_read_json(args.input)), None


def _emit(payload, output):
    text = json.dumps(payload, indent=2, sort_keys=False)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _grid(args):
    return verify.SampleGrid(seed=args.seed)


def _options(args):
    return {
        "seed": args.seed,
        "tol_span": args.tol_span,
        "tol_fd": args.tol_fd,
        "threads": _threads(),
    }


def cmd_generate(args):
    model = _model_from(_read_json(args.input))
    report = verify.run_suite(model, "model", _grid(args), args.tol_span, args.tol_fd, threads=_threads())
    sym = report.notes.get("symmetry", {})
    payload = {
        "model": model.to_json(),
        "closure": {k: report.checks[k].to_json() for k in ("lambda_closure", "F_closure")},
        "nu_invariant": bool(sym.get("nu_invariant")),
        "report": report.to_json(),
        "options": _options(args),
    }
    _emit(payload, args.output)
    return report.exit_code


def cmd_factorize(args):
    name, model, _ = _source(args)
    if model is None:
        raise InputError("factorize needs a Grassmannian model")
    fac = FACTORIZATIONS[args.filtration](model)
    sym = symmetry_predicates(fac.solution, model.r)
    report = verify.run_suite(fac.solution, "extended-solution", _grid(args), args.tol_span, args.tol_fd, name,
                              _threads())
    payload = {
        "fixture": name,
        "filtration": args.filtration,
        "uniton_ranks": [u.generic_rank for u in fac.unitons],
        "stage_ranks": [s.generic_rank for s in fac.filtration],
        "symmetry": sym,
        "report": report.to_json(),
        "options": _options(args),
    }
    _emit(payload, args.output)
    return report.exit_code


def _map_for(model, analytic):
    if analytic is not None:
        return analytic
    return uhlenbeck_filtration(model).solution.harmonic_map()


def _run_pipeline(args, model, analytic):
    pipeline = args.pipeline
    variant = args.variant
    if pipeline == "canonical":
        if model is None:
            raise InputError("the canonical pipeline needs a Grassmannian model")
        return [tw.canonical_lift(model)]
    phi = _map_for(model, analytic)
    if pipeline == "burstall":
        return tw.burstall_lift(phi, variants=(variant,) if variant else ("iii", "iv"))
    if pipeline == "strongly-conformal":
        return [tw.strongly_conformal_lifts(phi)]
    if pipeline == "uniton-anchored":
        alpha = filt.burstall_filtration(phi).stages[-2]
        return [tw.uniton_anchored_lift(phi, alpha, variant=variant or "i")]
    return [tw.real_ocs_lift(phi, variant=variant or "i")]


def cmd_lift(args):
    name, model, analytic = _source(args)
    try:
        reports = _run_pipeline(args, model, analytic)
    except (ContractError, NotNormalizedError) as exc:
        check = "not_normalized" if isinstance(exc, NotNormalizedError) else "precondition"
        payload = {"fixture": name, "pipeline": args.pipeline, "pass": False, "failed_check": check,
                   "message": str(exc), "residual": getattr(exc, "residual", None), "options": _options(args)}
        _emit(payload, args.output)
        return verify.EXIT_FAIL
    checked = [verify.run_suite(r, "lift", _grid(args), args.tol_span, args.tol_fd, name) for r in reports]
    passed = bool(reports) and all(c.passed for c in checked)
    payload = {
        "fixture": name,
        "pipeline": args.pipeline,
        "pass": passed,
        "lifts": [r.to_json() for r in reports],
        "reports": [c.to_json() for c in checked],
        "options": _options(args),
    }
    _emit(payload, args.output)
    return verify.EXIT_PASS if passed else verify.EXIT_FAIL


def _recheck(obj):
    """Recompute pass flags from a stored report or lift file."""
    out = verify.Report("recheck", provenance=obj.get("provenance", {}))
    if obj.get("schema") == verify.SCHEMA:
        for key, check in obj.get("checks", {}).items():
            out.add(key, check["max_residual"], check["threshold"])
        return out
    for idx, rep in enumerate(obj.get("reports", [])):
        for key, check in rep.get("checks", {}).items():
            out.add(f"lift{idx}.{key}", check["max_residual"], check["threshold"])
    if not out.checks:
        raise InputError("nothing to re-check in the input")
    return out


def cmd_verify(args):
    name = getattr(args, "fixture", None)
    if name:
        fx = fixtures.get(name)
        obj = fx.model if fx.model is not None else fx.analytic
        suite = args.suite or ("model" if fx.model is not None else "map")
    else:
        if not args.input:
            raise InputError("give an input file or --fixture NAME")
        data = _read_json(args.input)
        if isinstance(data, dict) and (data.get("schema") == verify.SCHEMA or "reports" in data):
            report = _recheck(data)
            _emit(report.to_json(), args.output)
            return report.exit_code
        obj = _model_from(data)
        suite = args.suite or "model"
    report = verify.run_suite(obj, suite, _grid(args), args.tol_span, args.tol_fd, name, _threads())
    _emit(report.to_json(), args.output)
    return report.exit_code


def cmd_fixtures(args):
    if args.action == "list":
        _emit({"fixtures": fixtures.names()}, args.output)
        return verify.EXIT_PASS
    if not args.name:
        raise InputError("fixtures emit needs a name")
    _emit(fixtures.get(args.name).to_json(), args.output)
    return verify.EXIT_PASS


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="sampling seed (default 0xC0FFEE)")
    common.add_argument("--tol-span", type=float, default=SPAN_TOL, help="threshold for exact span checks")
    common.add_argument("--tol-fd", type=float, default=FD_TOL, help="threshold for derivative-backed checks")
    common.add_argument("--output", "-o", help="write JSON here instead of stdout")

    parser = argparse.ArgumentParser(prog="twistorlift", description="Twistor lifts of harmonic maps from loop-group data.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="build a model from generator JSON")
    gen.add_argument("input")
    gen.set_defaults(func=cmd_generate)

    fac = sub.add_parser("factorize", parents=[common], help="uniton factorization of a model")
    fac.add_argument("input", nargs="?")
    fac.add_argument("--fixture")
    fac.add_argument("--filtration", choices=sorted(FACTORIZATIONS), default="uhlenbeck")
    fac.set_defaults(func=cmd_factorize)

    lift = sub.add_parser("lift", parents=[common], help="run a lift pipeline")
    lift.add_argument("input", nargs="?")
    lift.add_argument("--fixture")
    lift.add_argument("--pipeline", choices=PIPELINES, default="canonical")
    lift.add_argument("--variant", choices=("i", "ii", "iii", "iv"))
    lift.set_defaults(func=cmd_lift)

    ver = sub.add_parser("verify", parents=[common], help="run residual suites or re-check a report")
    ver.add_argument("input", nargs="?")
    ver.add_argument("--fixture")
    ver.add_argument("--suite", choices=sorted(verify.SUITES))
    ver.set_defaults(func=cmd_verify)

    fix = sub.add_parser("fixtures", parents=[common], help="list or emit built-in fixtures")
    fix.add_argument("action", choices=("list", "emit"))
    fix.add_argument("name", nargs="?")
    fix.set_defaults(func=cmd_fixtures)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return verify.EXIT_INPUT if exc.code else verify.EXIT_PASS
    if args.command == "lift" and args.variant:
        allowed = {"burstall": ("iii", "iv"), "uniton-anchored": ("i", "ii"), "real-ocs": ("i", "ii")}
        if args.variant not in allowed.get(args.pipeline, ()):
            sys.stderr.write(f"error: --variant {args.variant} does not apply to pipeline {args.pipeline}\n")
            return verify.EXIT_INPUT
    try:
        return args.func(args)
    except (InputError, DomainError, CapacityError, PoleError) as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return verify.EXIT_INPUT
    except TwistorLiftError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return verify.EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
