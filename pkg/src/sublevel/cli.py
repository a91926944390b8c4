"""Command-line entry point: ``sublevel run|explain|list-families``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError
from .functionals import FAMILIES
from .suite import explain, load_config, run_suite


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as err:
        print(f"config error:\n{err}", file=sys.stderr)
        return 2
    result = run_suite(cfg, args.out, jobs=args.jobs, seed=args.seed, tol_abs=args.tol_abs, tol_rel=args.tol_rel)
    for rep in result.reports:
        status = "PASS" if rep["passed"] else ("EXPLORATORY" if rep["exploratory"] else "FAIL")
        print(f"{status:12s} {rep['job']} ({rep['kind']})")
    print(f"{len(result.reports)} jobs, reports in {args.out}")
    return result.exit_status


def _cmd_explain(args) -> int:
    target = Path(args.report)
    paths = sorted(target.glob("*.json")) if target.is_dir() else [target]
    for i, path in enumerate(paths):
        try:
            report = json.loads(path.read_text())
            text = explain(report)
        except (OSError, json.JSONDecodeError, ConfigError, KeyError, TypeError) as err:
            print(f"{path}: cannot explain report: {err}", file=sys.stderr)
            return 2
        if i:
            print()
        print(text)
    return 0


def _cmd_list(args) -> int:
    for name in sorted(FAMILIES):
        print(f"{name:10s} {FAMILIES[name][1]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sublevel", description="Verification suites for sub-level set infimum identities")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a suite config and write JSON/CSV reports")
    run.add_argument("config", help="suite configuration (JSON)")
    run.add_argument("--out", default="reports", help="output directory (default: reports)")
    run.add_argument("--seed", type=int, default=None, help="override every job seed")
    run.add_argument("--jobs", type=int, default=1, help="worker processes across jobs")
    run.add_argument("--tol-abs", type=float, default=None, help="absolute tolerance override")
    run.add_argument("--tol-rel", type=float, default=None, help="relative tolerance override")
    run.set_defaults(func=_cmd_run)

    exp = sub.add_parser("explain", help="print a human-readable table for a report file or directory")
    exp.add_argument("report")
    exp.set_defaults(func=_cmd_explain)

    fam = sub.add_parser("list-families", help="list instance families")
    fam.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
