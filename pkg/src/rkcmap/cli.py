"""Command line front end.

    rkcmap list
    rkcmap describe flat-identity
    rkcmap certify --config flat-identity --out runs
    rkcmap sweep-eps --config ellipse-p4-sweep --jobs 4

Exit codes: 0 success, 1 a check failed, 2 invalid configuration,
3 solver failure, 4 continuation failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import runner, scenario
from .errors import ValidationError

COMMANDS = {
    "solve": "solve",
    "homotopy": "homotopy",
    "certify": "certify",
    "sweep-eps": "sweep",
    "geodesics": "geodesics",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rkcmap", description="p-harmonic map experiments on the unit disc")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "run"]:
        sp = sub.add_parser(name, help="run the scenario's own kind" if name == "run" else f"{name} a scenario")
        sp.add_argument("--config", required=True, help="bundled scenario name or path to a scenario file")
        sp.add_argument("--out", default="runs", help="output root; results go to <out>/<scenario name>")
        sp.add_argument("--grid-n", type=int, default=None, help="override the grid resolution")
        sp.add_argument("--jobs", type=int, default=1, help="concurrent solves for sweep-eps")
    sub.add_parser("list", help="list bundled scenarios")
    dp = sub.add_parser("describe", help="print the resolved configuration of a bundled scenario")
    dp.add_argument("name")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "list":
            print("\n".join(scenario.list_scenarios()))
            return runner.EXIT_OK
        if args.command == "describe":
            sys.stdout.write(scenario.describe(args.name))
            return runner.EXIT_OK
        if args.jobs < 1:
            raise ValidationError("--jobs", "must be at least 1")
        if args.grid_n is not None and args.grid_n < 8:
            raise ValidationError("--grid-n", "must be at least 8")
        sc = scenario.load(args.config).with_grid(args.grid_n)
        kind = sc.run if args.command == "run" else COMMANDS[args.command]
        if kind == "homotopy" and not sc.eps > 0:
            raise ValidationError("params.eps", "homotopy needs eps > 0")
        if kind == "sweep" and 0.0 not in sc.eps_list:
            raise ValidationError("params.eps_list", "must contain 0 as the reference")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return runner.EXIT_VALIDATION
    out = runner.Output(os.path.join(args.out, sc.name))
    fn = runner.RUNNERS[kind]
    code, report = fn(sc, out, args.jobs) if kind == "sweep" else fn(sc, out)
    print(f"{sc.name}: {report.get('status', 'done')} (exit {code}) -> {out.directory}")
    return code


if __name__ == "__main__":
    sys.exit(main())
