"""
Command-line entry point: `python -m app <command> ...`.

Exit codes: 0 success (and every verification record passed), 1 verification
failures, 2 input or usage errors.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from app import __version__
from app.core.errors import ExclusionBoundsError, ProblemValidationError
from app.core.settings import settings
from app.io.problem import parse_problem, write_problem
from app.io.report import render_report, report_hash, write_report
from app.services.divergences import DIVERGENCES, divergence
from app.services.ensembles import random_channel_ensemble, random_ensemble
from app.services.exclusion import (
    ChannelEnsemble,
    StateEnsemble,
    channel_exclusion_oneshot,
    exponent_from_error,
    min_error_exclusion,
    n_copy_error,
)
from app.services.radii import (
    bs_state_radius,
    channel_bs_radius,
    log_euclidean_chernoff,
    oneshot_converse_bound,
    sandwiched_radius_affine,
    umegaki_radius,
)
from app.services.verification import SUITES, run_suite

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURES, EXIT_INPUT = 0, 1, 2


def _states(path: str) -> StateEnsemble:
    ensemble = parse_problem(path)
    if not isinstance(ensemble, StateEnsemble):
        raise ProblemValidationError("kind", "this command needs a 'states' problem file")
    return ensemble


def _channels(path: str) -> ChannelEnsemble:
    ensemble = parse_problem(path)
    if not isinstance(ensemble, ChannelEnsemble):
        raise ProblemValidationError("kind", "this command needs a 'channels' problem file")
    return ensemble


def _emit(payload: Dict[str, Any], fmt: str) -> None:
    if fmt == "json":
        print(json.dumps(payload, indent=2))
        return
    print("field,value")
    for key, value in payload.items():
        text = json.dumps(value) if isinstance(value, (list, dict)) else value
        print(f"{key},{text}")


# ---- commands ----

def cmd_divergence(args) -> Dict[str, Any]:
    ensemble = _states(args.file)
    i, j = args.pair
    if not (0 <= i < ensemble.r and 0 <= j < ensemble.r):
        raise ProblemValidationError("pair", f"indices {i}, {j} out of range for {ensemble.r} states")
    value = divergence(args.kind, ensemble.states[i], ensemble.states[j], args.alpha)
    return {"kind": args.kind, "alpha": args.alpha, "pair": [i, j], "value": value}


def cmd_pexcl(args) -> Dict[str, Any]:
    ensemble = parse_problem(args.file)
    if isinstance(ensemble, ChannelEnsemble):
        strategy = channel_exclusion_oneshot(ensemble, restarts=args.restarts, seed=args.seed)
        return {"value": strategy.value, "label": strategy.label, "restarts": strategy.restarts}
    solution = min_error_exclusion(ensemble, gap_tol=args.gap_tol, method=args.method)
    return {
        "value": solution.value,
        "dual_value": solution.dual_value,
        "duality_gap": solution.duality_gap,
        "method": solution.method,
        "stalled": solution.stalled,
    }


def cmd_exponent(args) -> Dict[str, Any]:
    ensemble = _states(args.file)
    rows = []
    for n in range(1, args.n_max + 1):
        value = n_copy_error(ensemble, n, gap_tol=args.gap_tol).value
        rows.append({"n": n, "error": value, "exponent": exponent_from_error(value, n)})
    return {"n_max": args.n_max, "exponents": rows}


def cmd_chernoff(args) -> Dict[str, Any]:
    result = log_euclidean_chernoff(_states(args.file))
    return {
        "value": result.value,
        "weights": [float(s) for s in result.weights.s],
        "primal_dual_gap": result.primal_dual_gap,
        "regularization": result.regularization,
        "eps_trace": [list(pair) for pair in result.eps_trace],
    }


def cmd_radius(args) -> Dict[str, Any]:
    ensemble = _states(args.file)
    payload: Dict[str, Any] = {"kind": args.kind}
    if args.kind == "umegaki":
        result = umegaki_radius(ensemble)
    elif args.kind == "sandwiched":
        if args.alpha is None:
            raise ProblemValidationError("alpha", "--alpha is required for the sandwiched radius")
        result = sandwiched_radius_affine(ensemble, args.alpha)
        payload["alpha"] = args.alpha
        payload["converse_bound"] = oneshot_converse_bound(ensemble, args.alpha)
    else:
        result = bs_state_radius(ensemble, restarts=args.restarts, seed=args.seed)
    payload.update({
        "value": result.value,
        "weights": [float(s) for s in result.weights.s],
        "primal_dual_gap": result.primal_dual_gap,
        "stalled": result.stalled,
    })
    return payload


def cmd_channel_bound(args) -> Dict[str, Any]:
    ensemble = _channels(args.file)
    result = channel_bs_radius(ensemble, restarts=args.restarts, seed=args.seed)
    strategy = channel_exclusion_oneshot(ensemble, restarts=args.restarts, seed=args.seed)
    return {
        "radius": result.value,
        "weights": [float(s) for s in result.weights.s],
        "stationarity": result.primal_dual_gap,
        "oneshot_error": strategy.value,
        "oneshot_exponent": exponent_from_error(strategy.value, 1),
        "oneshot_label": strategy.label,
    }


def cmd_random(args) -> Dict[str, Any]:
    if args.kind == "states":
        ensemble = random_ensemble(args.seed, args.r, args.d, args.rank)
    else:
        ensemble = random_channel_ensemble(args.seed, args.r, args.d, args.channel_kind)
    metadata = {"generator": args.kind, "seed": args.seed, "tool_version": __version__}
    path = write_problem(args.output, ensemble, metadata)
    return {"path": str(path), "r": ensemble.r}


COMMANDS = {
    "divergence": cmd_divergence,
    "pexcl": cmd_pexcl,
    "exponent": cmd_exponent,
    "chernoff": cmd_chernoff,
    "radius": cmd_radius,
    "channel-bound": cmd_channel_bound,
    "random": cmd_random,
}


def _rank(text: str):
    return text if text in ("full", "pure") else int(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="exclusion-bounds", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--out", choices=("json", "csv"), default="json", help="output format")
    parser.add_argument("--quiet", action="store_true", help="no summary line, errors only in the log")
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("divergence", help="divergence between two states of a problem file")
    p.add_argument("--file", required=True)
    p.add_argument("--kind", required=True, choices=sorted(DIVERGENCES))
    p.add_argument("--alpha", type=float)
    p.add_argument("--pair", type=int, nargs=2, default=(0, 1), metavar=("I", "J"))

    p = sub.add_parser("pexcl", help="minimum exclusion error")
    p.add_argument("--file", required=True)
    p.add_argument("--gap-tol", type=float)
    p.add_argument("--method", choices=("auto", "spectral", "sdp"), default="auto")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("exponent", help="n-copy exclusion errors and exponents")
    p.add_argument("--file", required=True)
    p.add_argument("--n-max", type=int, default=3)
    p.add_argument("--gap-tol", type=float)

    p = sub.add_parser("chernoff", help="log-Euclidean Chernoff divergence")
    p.add_argument("--file", required=True)

    p = sub.add_parser("radius", help="divergence radius of a state ensemble")
    p.add_argument("--file", required=True)
    p.add_argument("--kind", choices=("umegaki", "sandwiched", "bs"), default="umegaki")
    p.add_argument("--alpha", type=float)
    p.add_argument("--restarts", type=int)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("channel-bound", help="BS channel radius and the n = 1 channel exclusion value")
    p.add_argument("--file", required=True)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("random", help="write a seeded random problem file")
    p.add_argument("--kind", choices=("states", "channels"), default="states")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--rank", type=_rank, default="full")
    p.add_argument("--channel-kind", choices=("random", "replacer", "identical"), default="random")
    p.add_argument("--output", required=True)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", required=True, choices=SUITES)
    p.add_argument("--trials", type=int, help="defaults per suite: 100 oneshot, 50 asymptotic, 5 channel")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float)
    p.add_argument("--n-max", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report-dir", type=Path, help="defaults to REPORT_DIR when set")
    return parser


def _verify(args) -> int:
    report = run_suite(args.suite, args.trials, args.seed, tol=args.tol, workers=args.workers, n_max=args.n_max)
    report.hash = report_hash(report)
    directory = args.report_dir or settings.REPORT_DIR
    if directory is not None:
        write_report(report, args.out, directory)
    print(render_report(report, args.out), end="" if args.out == "csv" else "\n")
    if not args.quiet:
        s = report.summary
        print(f"{report.suite}: {s.records} records over {s.trials} trials, {s.failures} failures, "
              f"min margin {s.min_margin:.3g}, hash {report.hash[:12]}", file=sys.stderr)
    return EXIT_FAILURES if report.summary.failures else EXIT_OK


def run_cli(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(
        level=logging.ERROR if args.quiet else getattr(logging, args.log_level),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logger.debug("command %s", args.command)
    try:
        if args.command == "verify":
            return _verify(args)
        payload = COMMANDS[args.command](args)
    except (ExclusionBoundsError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _emit(payload, args.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(run_cli())
