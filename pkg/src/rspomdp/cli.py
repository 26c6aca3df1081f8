"""``rspomdp`` command line.

Exit codes: 0 success, 2 invalid input (model, flags, preconditions),
3 solver failure. Errors are written to stderr as one JSON object.
``RSPOMDP_THREADS`` is read for compatibility; all solvers run on one thread.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

from .errors import (
    BetaOne,
    CostNotPositive,
    ModelError,
    NonMonotoneUtility,
    RSPOMDPError,
    WrongUtility,
)
from .filtering import filter_trace
from .house_selling import house_from_dict, reservation_levels, validate_house
from .house_selling import _Solver as _HouseSolver
from .house_selling import initial_stop_measure
from .model import model_from_dict, parse_json, validate
from .simulate import monte_carlo
from .solver_exp import solve_finite_exp
from .solver_finite import PolicyTree, solve_finite
from .solver_infinite import solve_infinite, solve_infinite_exp
from .solver_power import solve_finite_power
from .utility import Exponential, Power

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3
_INPUT_ERRORS = (ModelError, WrongUtility, BetaOne, CostNotPositive, NonMonotoneUtility)


class UsageError(Exception):
    """Bad flags or preconditions detected before any solver runs."""


def _finite(obj):
    """Replace non-finite floats by null so the output stays strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _dumps(obj) -> str:
    return json.dumps(_finite(obj), allow_nan=False)


def _emit(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _read_doc(path: str) -> dict:
    try:
        return parse_json(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path} is not valid JSON: {exc}") from exc


def _load_valid_model(path: str, *, infinite: bool = False):
    spec = model_from_dict(_read_doc(path))
    report = validate(spec, infinite_horizon=infinite)
    if not report.ok:
        raise _Invalid(report.violations)
    return spec


class _Invalid(Exception):
    def __init__(self, violations):
        super().__init__("model failed validation")
        self.violations = violations


def _check_x0(spec, x0: int) -> None:
    if not 0 <= x0 < spec.nx:
        raise UsageError(f"x0={x0} outside [0, {spec.nx})")


# -- commands --------------------------------------------------------------

def cmd_validate(args) -> int:
    doc = _read_doc(args.model)
    if "thetas" in doc:
        report = validate_house(house_from_dict(doc))
    else:
        report = validate(model_from_dict(doc), infinite_horizon=args.infinite)
    _emit(_dumps(report.to_dict()) + "\n", args.output)
    return EXIT_OK if report.ok else EXIT_INPUT


def _solve_one(spec, args, x0):
    if args.fast_exp:
        return solve_finite_exp(spec, args.horizon, x0, total_cost=args.total_cost)
    if args.fast_power:
        return solve_finite_power(
            spec, args.horizon, x0, total_cost=args.total_cost, initial_cost=args.initial_cost
        )
    return solve_finite(spec, args.horizon, x0, total_cost=args.total_cost, initial_cost=args.initial_cost)


def cmd_solve(args) -> int:
    if args.horizon < 1:
        raise UsageError("N >= 1 required")
    if args.fast_exp and args.fast_power:
        raise UsageError("--fast-exp and --fast-power are exclusive")
    spec = _load_valid_model(args.model)
    if args.fast_exp and not isinstance(spec.utility, Exponential):
        raise UsageError("--fast-exp requires an exponential utility")
    if args.fast_power and not isinstance(spec.utility, Power):
        raise UsageError("--fast-power requires a power utility")
    if args.x0 is not None:
        _check_x0(spec, args.x0)
        out = _solve_one(spec, args, args.x0).to_dict()
    else:
        results = [_solve_one(spec, args, x0) for x0 in range(spec.nx)]
        out = {
            "horizon": args.horizon,
            "solver": results[0].solver,
            "values": [r.value for r in results],
            "certainty_equivalents": [r.certainty_equivalent for r in results],
            "results": [r.to_dict() for r in results],
        }
    _emit(_dumps(out) + "\n", args.output)
    return EXIT_OK


def cmd_solve_inf(args) -> int:
    if not args.eps > 0:
        raise UsageError("--eps must be positive")
    spec = _load_valid_model(args.model, infinite=True)
    _check_x0(spec, args.x0)
    if args.fast_exp:
        if not isinstance(spec.utility, Exponential):
            raise UsageError("--fast-exp requires an exponential utility")
        result = solve_infinite_exp(spec, args.x0, args.eps)
    else:
        result = solve_infinite(spec, args.x0, args.eps)
    _emit(_dumps(result.to_dict(with_policy=args.with_policy)) + "\n", args.output)
    return EXIT_OK


def _parse_obs(text: str) -> list[tuple[int, int]]:
    obs = []
    for part in filter(None, (p.strip() for p in text.split(";"))):
        try:
            a, x2 = (int(v) for v in part.split(","))
        except ValueError:
            raise UsageError(f"bad observation {part!r}; expected 'action,next_x'") from None
        obs.append((a, x2))
    return obs


def cmd_filter(args) -> int:
    spec = _load_valid_model(args.model)
    _check_x0(spec, args.x0)
    trace = filter_trace(spec, args.x0, _parse_obs(args.obs))
    _emit("".join(_dumps(row) + "\n" for row in trace.to_lines()), args.output)
    return EXIT_OK


def cmd_house(args) -> int:
    doc = _read_doc(args.model)
    model = house_from_dict(doc)
    if args.horizon is not None:
        model = model.replace(N=args.horizon)
    report = validate_house(model)
    if not report.ok:
        raise _Invalid(report.violations)
    solver = _HouseSolver(model)
    rows = reservation_levels(model, solver=solver)
    mu0 = initial_stop_measure(model)
    summary = {"horizon": model.N, "continuation": solver.d(model.N, mu0)}
    if args.x0 is not None:
        summary["value"] = solver.value(model.N, args.x0, mu0)
    if args.format == "json":
        summary["levels"] = [r.to_dict() for r in rows]
        _emit(_dumps(summary) + "\n", args.output)
        return EXIT_OK
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "offers", "threshold", "continuation"])
    for r in rows:
        writer.writerow([r.n, " ".join(repr(v) for v in r.offers), repr(r.threshold), repr(r.continuation)])
    _emit(buf.getvalue(), args.output)
    if args.summary:
        _emit(_dumps(summary) + "\n", args.summary)
    elif args.output not in (None, "-"):
        sys.stdout.write(_dumps(summary) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    spec = _load_valid_model(args.model)
    pdoc = _read_doc(args.policy)
    if "results" in pdoc:  # solve output covering every initial state
        if args.x0 is None:
            raise UsageError("--x0 is required with a multi-start policy file")
        _check_x0(spec, args.x0)
        pdoc = pdoc["results"][args.x0]
    policy = PolicyTree.from_dict(pdoc.get("policy", pdoc))
    n = args.n if args.n is not None else policy.horizon
    x0 = args.x0 if args.x0 is not None else policy.x0
    if n < 1:
        raise UsageError("N >= 1 required")
    _check_x0(spec, x0)
    mean, half = monte_carlo(spec, policy, n, x0, args.samples, args.seed)
    out = {"mean": mean, "halfwidth": half, "samples": args.samples, "seed": args.seed, "horizon": n, "x0": x0}
    _emit(_dumps(out) + "\n", args.output)
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rspomdp", description="Risk-sensitive POMDP solvers.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model=True):
        if model:
            sp.add_argument("--model", required=True, help="model JSON file")
        sp.add_argument("--output", default="-", help="output file, '-' for stdout")

    sp = sub.add_parser("validate", help="check a model file")
    common(sp)
    sp.add_argument("--infinite", action="store_true", help="also check infinite-horizon requirements")
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("solve", help="exact finite-horizon solve")
    common(sp)
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--x0", type=int, default=None, help="initial state (default: all)")
    sp.add_argument("--total-cost", action="store_true", help="ignore discounting (beta = 1)")
    sp.add_argument("--fast-exp", action="store_true", help="information-vector solver (exponential U)")
    sp.add_argument("--fast-power", action="store_true", help="rescaled-cost solver (power U)")
    sp.add_argument("--initial-cost", type=float, default=0.0)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("solve-inf", help="certified discounted infinite-horizon bounds")
    common(sp)
    sp.add_argument("--x0", type=int, default=0)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--fast-exp", action="store_true")
    sp.add_argument("--with-policy", action="store_true", help="include the decision tree")
    sp.set_defaults(func=cmd_solve_inf)

    sp = sub.add_parser("filter", help="joint filter along an observed history")
    common(sp)
    sp.add_argument("--x0", type=int, default=0)
    sp.add_argument("--obs", default="", help="'a0,x1;a1,x2;...'")
    sp.set_defaults(func=cmd_filter)

    sp = sub.add_parser("house", help="reservation levels for house selling")
    common(sp)
    sp.add_argument("--horizon", type=int, default=None)
    sp.add_argument("--x0", type=float, default=None, help="first offer, to report J_N(x0)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--summary", default=None, help="where to write the JSON summary in csv mode")
    sp.set_defaults(func=cmd_house)

    sp = sub.add_parser("simulate", help="Monte-Carlo evaluation of a policy")
    common(sp)
    sp.add_argument("--policy", required=True, help="policy JSON (as written by solve)")
    sp.add_argument("--n", type=int, default=None, help="horizon (default: the policy's)")
    sp.add_argument("--x0", type=int, default=None)
    sp.add_argument("--samples", type=int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_simulate)
    return p


def _fail(code: int, doc: dict) -> int:
    sys.stderr.write(_dumps(doc) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("RSPOMDP_THREADS")
    if threads is not None and not threads.strip().isdigit():
        return _fail(EXIT_INPUT, {"error": "UsageError", "message": "RSPOMDP_THREADS must be a positive integer"})
    try:
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_INPUT, {"error": "UsageError", "message": str(exc)})
    except _Invalid as exc:
        return _fail(EXIT_INPUT, {"error": "ValidationError", "message": str(exc), "violations": exc.violations})
    except _INPUT_ERRORS as exc:
        return _fail(EXIT_INPUT, exc.to_dict())
    except RSPOMDPError as exc:
        return _fail(EXIT_SOLVER, exc.to_dict())


if __name__ == "__main__":
    sys.exit(main())
