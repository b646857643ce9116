"""Command line entry point: ``qkdake run|list|explain``."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .harness import (CATALOG, InvalidOverride, UnknownScenario, explain, list_scenarios,
                      load_config, run_scenario)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkdake", description="BB84 key exchange security-game runner")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a catalog scenario and emit its report")
    run.add_argument("scenario")
    run.add_argument("--n1", type=int)
    run.add_argument("--trials", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--fraction", type=float)
    run.add_argument("--sig", choices=("ideal", "breakable"))
    run.add_argument("--threshold", type=float)
    run.add_argument("--out", help="report path (default: $QKDAKE_OUT_DIR/<scenario>.json)")
    run.add_argument("--dump-transcript", dest="dump", help="write line-delimited transcript here")
    run.add_argument("--config", help="JSON file of settings; flags take precedence")
    run.add_argument("--csv", help="also write aggregates as a one-row CSV")
    run.add_argument("--quiet", action="store_true", help="print only the pass/fail lines")

    sub.add_parser("list", help="list catalog scenarios")
    ex = sub.add_parser("explain", help="describe a scenario and its defaults")
    ex.add_argument("scenario")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            for name in list_scenarios():
                print(f"{name:26s} {CATALOG[name].summary}")
            return 0
        if args.command == "explain":
            print(explain(args.scenario))
            return 0

        overrides = {k: getattr(args, k) for k in ("n1", "trials", "seed", "fraction", "sig", "threshold")}
        file_cfg = load_config(args.config) if args.config else None
        report = run_scenario(args.scenario, overrides, out=args.out, dump=args.dump,
                              config_file=file_cfg, csv_path=args.csv)
    except (UnknownScenario, InvalidOverride) as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if not args.quiet:
        print(json.dumps(report.aggregates, indent=2, sort_keys=True, default=str))
    for a in report.assertions:
        print(f"{'PASS' if a.passed else 'FAIL'} {a.name}: {a.detail}")
    print(f"{report.scenario}: {'PASS' if report.passed else 'FAIL'} ({report.timing['elapsed_s']}s)")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
