"""Command-line entry point.

Subcommands: simulate, estimate, campaign, mgf, cov, check. Exit codes:
0 success, 1 usage error, 2 computational error (reported as a JSON body).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .asymp import (
    delta_method_cov,
    finiteness_check,
    general_moment_cov,
    geometric_moment_cov,
)
from .errors import (
    ConvergenceError,
    DegenerateSaddleError,
    IncompatibleMomentsError,
    InfiniteMeanError,
    OutOfRangeError,
    ParameterError,
)
from .harness import ExperimentConfig, emit_outputs, infer_family, mix_seed, run_campaign
from .laws import Geometric
from .moments import (
    empirical_moments,
    estimate_from_subgraph,
    estimator_for,
    moments_needed,
)
from .renewal import joint_distribution, joint_mgf
from .simulate import ModelSpec, load_trace, save_trace, simulate_trace

_COMPUTE_ERRORS = (
    ParameterError, InfiniteMeanError, OutOfRangeError, IncompatibleMomentsError,
    ConvergenceError, DegenerateSaddleError, ValueError, OSError,
)


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="onoffgraph",
                     description="dynamic on/off random graph simulation and estimation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, help_text, config_required=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=config_required,
                       help="JSON model/experiment config")
        return p

    p = add("simulate", "simulate a count trace and write it as CSV")
    p.add_argument("--k", type=int, help="trace length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="trace.csv", help="output CSV path")
    p.add_argument("--kind", choices=["edges", "triangles", "wedges"])

    p = add("estimate", "estimate parameters from a saved trace")
    p.add_argument("--trace", required=True, help="trace CSV path")

    p = add("campaign", "run a replication campaign and emit summary files")
    p.add_argument("--k", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int)

    p = add("mgf", "evaluate the joint MGF or a joint on-pattern law")
    p.add_argument("--theta", help="comma-separated tilt vector (entries may be -inf)")
    p.add_argument("--epochs", help="comma-separated epochs for the joint law")

    p = add("cov", "limiting covariances of the moment statistics")
    p.add_argument("--general", action="store_true",
                   help="force the general series even for geometric laws")

    add("check", "report whether the limiting covariances are finite")
    return parser


def _load_config(path) -> dict:
    text = Path(path).read_text()
    return json.loads(text)


def _fail(exc) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
    return 2


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        model = ModelSpec.from_config(cfg)
    except (KeyError, json.JSONDecodeError) as exc:
        print(f"onoffgraph: bad config: {exc}", file=sys.stderr)
        return 1
    except _COMPUTE_ERRORS as exc:
        return _fail(exc)
    try:
        return _dispatch(args, cfg, model)
    except _COMPUTE_ERRORS as exc:
        return _fail(exc)


def _dispatch(args, cfg, model) -> int:
    if args.command == "simulate":
        K = args.k or cfg.get("K", 10_000)
        kind = args.kind or cfg.get("kind", "edges")
        rng = np.random.default_rng(args.seed)
        trace = simulate_trace(model, K, rng, kind=kind)
        trace.seed = args.seed
        save_trace(trace, args.out)
        print(json.dumps({"out": str(args.out), "kind": kind, "K": K}))
        return 0

    if args.command == "estimate":
        trace = load_trace(args.trace)
        family = cfg.get("family") or infer_family(model)
        moms = empirical_moments(trace, moments_needed(family))
        if trace.kind == "edges":
            report = estimator_for(family)(moms)
        else:
            report = estimate_from_subgraph(moms)
        print(json.dumps(report.to_json(), indent=2, sort_keys=True))
        return 0

    if args.command == "campaign":
        exp = ExperimentConfig.from_json(
            cfg, K=args.k, R=args.reps, base_seed=args.seed, workers=args.workers)
        summary = run_campaign(exp)
        emit_outputs(summary, args.out)
        print(json.dumps(summary.to_json(), indent=2, sort_keys=True))
        return 0

    if args.command == "mgf":
        if args.theta is None and args.epochs is None:
            print("onoffgraph mgf: need --theta or --epochs", file=sys.stderr)
            return 1
        out = {}
        if args.theta is not None:
            theta = np.array([float(x) for x in args.theta.split(",")])
            out["mgf"] = joint_mgf(model, theta)
        if args.epochs is not None:
            epochs = [int(x) for x in args.epochs.split(",")]
            probs = joint_distribution(model, epochs)
            out["epochs"] = epochs
            out["joint"] = {format(s, f"0{len(epochs)}b")[::-1]: float(p)
                            for s, p in enumerate(probs)}
        print(json.dumps(out, indent=2, sort_keys=True))
        return 0

    if args.command == "cov":
        ok, why = finiteness_check(model)
        if not ok:
            raise InfiniteMeanError(f"limiting covariances are infinite: {why}")
        geometric = (isinstance(model.on_law, Geometric)
                     and isinstance(model.off_law, Geometric))
        if geometric and not args.general:
            mc = geometric_moment_cov(model.n, model.on_law.p, model.off_law.p)
        else:
            mc = general_moment_cov(model, model.n)
        out = {"moment_cov": mc.to_json()}
        if geometric:
            pc = delta_method_cov(model.n, model.on_law.p, model.off_law.p, mc)
            out["param_cov"] = pc.to_json()
        print(json.dumps(out, indent=2, sort_keys=True))
        return 0

    if args.command == "check":
        ok, why = finiteness_check(model)
        print(json.dumps({"finite": ok, "explanation": why}))
        return 0

    raise AssertionError(f"unhandled command {args.command!r}")


if __name__ == "__main__":
    sys.exit(main())
