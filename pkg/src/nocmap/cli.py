"""Command line entry point: ``nocmap run|sweep --config FILE``.

Exit codes: 0 success, 1 bad config, 2 invariant violation, 3 livelock.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import (
    EXIT_OK,
    ConfigError,
    exit_code_for,
    load_config,
    run_scenario,
    run_sweep,
)
from .noc import NocError


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nocmap", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run one scenario"), ("sweep", "run a scenario over its sweep axis")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="scenario YAML file")
        sp.add_argument("--output", help="CSV path (overrides the config's output)")
        sp.add_argument("--dump-records", metavar="DIR",
                        help="write per-task travel records, one CSV per scenario and strategy")
        sp.add_argument("--trace", metavar="FILE", help="write per-flit router events")
        sp.add_argument("--jobs", type=int, help="worker processes for sweep points")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.jobs:
            cfg.jobs = args.jobs
        if not (args.output or cfg.output):
            raise ConfigError("no output path: set 'output' in the config or pass --output")
        runner = run_sweep if args.command == "sweep" else run_scenario
        report = runner(cfg, dump_records=args.dump_records, trace_path=args.trace,
                        output=args.output)
    except (NocError, ValueError, OSError) as e:
        code = exit_code_for(e)
        print(f"nocmap: error: {e}", file=sys.stderr)
        return code
    for sc, st, total, imp in report.totals():
        extra = "" if imp is None else f"  ({imp:+.2f}% vs {report.baseline})"
        print(f"{sc:24s} {st:16s} {total:>10d}{extra}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
