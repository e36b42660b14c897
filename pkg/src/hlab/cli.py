"""Command-line frontend: ``hlab check|solve|example|selftest``.

Exit status is 0 when every requested report passes (or a solve completes),
1 when a report fails and 2 on input errors.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from . import oracles
from .builtins import EXAMPLES, example_problem
from .conditions import ConditionReport
from .expr import HlabError
from .problem import ProblemFile
from .runner import RunReport, run_check, run_solve

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _apply_overrides(pf: ProblemFile, args) -> ProblemFile:
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.samples is not None:
        changes["count"] = args.samples
    if changes:
        pf.domain = dataclasses.replace(pf.domain, **changes)
    if args.tol is not None:
        pf.tol = args.tol
    return pf


def _emit(rr: RunReport, args) -> int:
    print("\n".join(rr.lines()))
    if getattr(args, "json", None):
        Path(args.json).write_text(rr.to_json(timing=args.timing) + "\n")
    # for solve, rr.reports holds the verification of each returned solution
    return EXIT_OK if rr.ok else EXIT_FAIL


def cmd_check(args) -> int:
    pf = _apply_overrides(ProblemFile.load(args.file), args)
    return _emit(run_check(pf), args)


def cmd_solve(args) -> int:
    pf = _apply_overrides(ProblemFile.load(args.file), args)
    return _emit(run_solve(pf), args)


def cmd_example(args) -> int:
    params = {}
    if args.name == "projective":
        params = {"lam": args.lam, "dim": args.dim}
    pf = _apply_overrides(example_problem(args.name, **params), args)
    rr = run_check(pf, command="example")
    return _emit(rr, args)


def selftest(seed: int = 0, samples: int = 1000) -> RunReport:
    t0 = time.perf_counter()
    reps = []

    def single(cid, value, tol, **parts):
        reps.append(ConditionReport(cid, np.array([value]), tol, 0, parts))

    single("JET_FD", oracles.jet_vs_fd(samples, seed), 1e-6)
    ratio = oracles.rk4_order_ratio()
    single("RK4_ORDER", abs(ratio - 16.0), 4.0, ratio=ratio)
    single("RPHI", oracles.rphi_sweep(50, seed), 1e-5)
    a = run_check(example_problem("ex1")).to_json(timing=False)
    b = run_check(example_problem("ex1")).to_json(timing=False)
    single("DETERMINISM", 0.0 if a == b else 1.0, 0.0)
    rr = RunReport("selftest", "selftest", "", {"seed": seed, "samples": samples}, reps)
    rr.timing["seconds"] = time.perf_counter() - t0
    return rr.finish()


def cmd_selftest(args) -> int:
    seed = 0 if args.seed is None else args.seed
    samples = 1000 if args.samples is None else args.samples
    return _emit(selftest(seed, samples), args)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="override the sampling seed")
    common.add_argument("--samples", type=int, help="override the number of samples")
    common.add_argument("--tol", type=float, help="override the check tolerance")
    common.add_argument("--json", metavar="PATH", help="also write the JSON report to PATH")
    common.add_argument("--timing", action="store_true",
                        help="include wall-clock timing in the JSON report (makes it non-reproducible)")

    p = argparse.ArgumentParser(prog="hlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", parents=[common], help="run the [check] ids of a problem file")
    c.add_argument("file")
    c.set_defaults(func=cmd_check)
    s = sub.add_parser("solve", parents=[common], help="search for a multiplier per [solve]")
    s.add_argument("file")
    s.set_defaults(func=cmd_solve)
    e = sub.add_parser("example", parents=[common], help="run a built-in example")
    e.add_argument("name", choices=sorted(EXAMPLES))
    e.add_argument("--lam", type=float, default=1.0, help="projective: lambda")
    e.add_argument("--dim", type=int, default=2, help="projective: dimension")
    e.set_defaults(func=cmd_example)
    t = sub.add_parser("selftest", parents=[common], help="oracle and determinism checks")
    t.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (HlabError, ValueError, OSError) as exc:
        print(f"hlab: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
