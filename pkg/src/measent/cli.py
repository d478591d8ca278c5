"""Command-line entry point ``measent``.

Exit codes: 0 success, 2 infinite divergence or infeasible constraint (report
still written), 3 numerical failure, 4 malformed input, 5 verification mismatch.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import AccuracyUnreachable, DomainError, InfeasibleConstraintError, InputError, NumericalFailure
from .io import REPORT_FORMAT, digest, load_json, load_problem, parse_alpha, write_report
from .report import compute, solver_block, timed, verify_report
from .states import SolverSummary

EXIT_OK = 0
EXIT_INFINITE = 2
EXIT_NUMERICAL = 3
EXIT_INPUT = 4
EXIT_MISMATCH = 5


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--input", required=True, type=Path, help="problem file, or a directory of them")
    p.add_argument("--out", type=Path, help="report file (directory in batch mode); stdout if omitted")
    p.add_argument("--alpha", help="Renyi order as p/q")
    p.add_argument("--eps", type=float, help="target accuracy for the logarithm approximation")
    p.add_argument("--m", type=int, help="quadrature nodes")
    p.add_argument("--k", type=int, help="square-root steps")
    p.add_argument("--gap-tol", type=float)
    p.add_argument("--feas-tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--regularize", type=float, metavar="DELTA", help="mix sigma with the maximally mixed state")
    p.add_argument("--budget", type=int, help="random bases sampled by the oracle")
    p.add_argument("--jobs", type=int, default=None, help="parallel workers in batch mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="measent", description="Measured Renyi and relative entropies via SDP")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("states-renyi", "measured Renyi divergence of two states"),
        ("states-relent", "measured relative entropy of two states"),
        ("channel-renyi", "measured Renyi divergence of two channels"),
        ("channel-relent", "measured relative entropy of two channels"),
        ("oracle", "brute-force search over projective measurements (d <= 3)"),
    ):
        _add_common(sub.add_parser(name, help=help_text))
    v = sub.add_parser("verify", help="re-check a report")
    v.add_argument("report", type=Path)
    return parser


def _apply_overrides(problem, args):
    if args.alpha is not None:
        problem.alpha = parse_alpha(args.alpha)
    if args.eps is not None:
        problem.eps = args.eps
    if (args.m is None) != (args.k is None):
        raise InputError("--m and --k go together")
    if args.m is not None:
        problem.m, problem.k = args.m, args.k
    for attr, val in (("gap_tol", args.gap_tol), ("feas_tol", args.feas_tol), ("seed", args.seed),
                      ("regularize", args.regularize), ("budget", args.budget)):
        if val is not None:
            setattr(problem, attr, val)
    return problem


def run_one(command: str, path: Path, args) -> tuple[int, dict | None, str]:
    """Solve one problem file; returns (exit code, report or None, message)."""
    problem = None
    try:
        problem = _apply_overrides(load_problem(path), args)
        report, elapsed = timed(compute, problem, command)
    except InfeasibleConstraintError as exc:
        if problem is None:
            return EXIT_INFINITE, None, f"infeasible constraint: {exc}"
        report = {"format": REPORT_FORMAT, "command": command, "input_digest": digest(problem.content()),
                  "problem": problem.content(), "status": "infeasible-constraint",
                  "infeasible_constraint": True, "error": str(exc)}
        return EXIT_INFINITE, report, f"infeasible constraint: {exc}"
    except (InputError, DomainError) as exc:
        return EXIT_INPUT, None, f"malformed input: {exc}"
    except (NumericalFailure, AccuracyUnreachable) as exc:
        if problem is None:
            return EXIT_NUMERICAL, None, f"numerical failure: {exc}"
        report = {"format": REPORT_FORMAT, "command": command, "input_digest": digest(problem.content()),
                  "problem": problem.content(), "status": "numerical-failure", "error": str(exc)}
        best = getattr(exc, "best", None)
        if best is not None:
            report["solver"] = solver_block(SolverSummary.of(best))
        return EXIT_NUMERICAL, report, f"numerical failure: {exc}"
    report["wall_time"] = elapsed
    if report["status"] == "infinite":
        return EXIT_INFINITE, report, "divergence is +inf"
    return EXIT_OK, report, ""


def _batch_worker(job):
    command, path, args = job
    return run_one(command, path, args)


def _solve_command(args) -> int:
    if args.input.is_dir():
        files = sorted(args.input.glob("*.json"))
        if not files:
            print(f"measent: no .json problems in {args.input}", file=sys.stderr)
            return EXIT_INPUT
        out_dir = args.out or args.input / "reports"
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs = [(args.command, f, args) for f in files]
        workers = args.jobs or min(len(files), os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_batch_worker, jobs))
        worst = EXIT_OK
        for f, (code, report, msg) in zip(files, outcomes):
            if report is not None:
                write_report(report, out_dir / f"{f.stem}.report.json")
            if msg:
                print(f"measent: {f.name}: {msg}", file=sys.stderr)
            worst = max(worst, code)
        return worst
    code, report, msg = run_one(args.command, args.input, args)
    if report is not None:
        text = write_report(report, args.out)
        if args.out is None:
            sys.stdout.write(text)
    if msg:
        print(f"measent: {msg}", file=sys.stderr)
    return code


def _verify_command(args) -> int:
    try:
        report = load_json(args.report)
        issues = verify_report(report)
    except (InputError, DomainError) as exc:
        print(f"measent: malformed report: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if issues:
        for line in issues:
            print(f"mismatch: {line}", file=sys.stderr)
        return EXIT_MISMATCH
    print("report verified")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _verify_command(args)
    return _solve_command(args)


if __name__ == "__main__":
    sys.exit(main())
