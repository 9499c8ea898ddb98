"""Command-line entry point: ``fracks`` / ``python -m fracks``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..errors import ConfigurationError, FracksError
from .config import OUTPUT_ROOT_ENV, parse_config
from .runner import format_table, run_scenario, run_transport


def _load(args):
    scen = parse_config(args.config)
    if args.output:
        scen = replace(scen, outputs=Path(args.output))
    return scen


def cmd_run(args) -> int:
    scen = _load(args)
    if scen.sweep:
        raise ConfigurationError("config declares a sweep; use the sweep subcommand", key="sweep")
    res = run_scenario(scen, workers=1)
    print(format_table(res.rows))
    print(f"outputs: {res.outputs}")
    return res.exit_code


def cmd_sweep(args) -> int:
    res = run_scenario(_load(args), workers=args.workers)
    print(format_table(res.rows))
    print(f"outputs: {res.outputs}")
    return res.exit_code


def cmd_transport(args) -> int:
    res = run_transport(_load(args))
    print(f"transport: sup ratio {res.rows[0].sup_ratio:.6g}; outputs: {res.outputs}")
    return res.exit_code


def cmd_verify(args) -> int:
    from .verify import verify_suite

    checks = verify_suite(args.filter)
    if not checks:
        print(f"no check matches {args.filter!r}", file=sys.stderr)
        return 1
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name:<13} {c.seconds:7.2f}s  {json.dumps(c.detail)}")
    if args.json:
        Path(args.json).write_text(json.dumps([c.as_dict() for c in checks], indent=2) + "\n")
    return 0 if all(c.passed for c in checks) else 1


def cmd_maxprinciple(args) -> int:
    from ..maxprinciple import falsify

    rep = falsify(args.alpha, args.d, args.p, args.trials, args.seed, n=args.n, c_lower_scale=args.c_lower_scale)
    print(json.dumps(rep.as_dict(), indent=2))
    return 0 if rep.passed else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracks", description="Fractional Keller-Segel solver with mixing flows.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def scenario_cmd(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="scenario JSON file")
        p.add_argument("-o", "--output", help=f"output directory (overrides config and ${OUTPUT_ROOT_ENV})")
        p.set_defaults(func=fn)
        return p

    scenario_cmd("run", cmd_run, "run a single scenario")
    sw = scenario_cmd("sweep", cmd_sweep, "run every point of a scenario's sweep")
    sw.add_argument("-j", "--workers", type=int, default=None, help="pool size (default: available cores)")
    scenario_cmd("transport", cmd_transport, "pure transport of the initial datum")

    v = sub.add_parser("verify", help="run the pinned property battery")
    v.add_argument("--filter", default=None, help="only checks whose name contains this string")
    v.add_argument("--json", default=None, help="also write the results to this file")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("check-maxprinciple", help="falsification battery for the maximum principle")
    m.add_argument("--alpha", type=float, required=True)
    m.add_argument("--d", type=int, required=True)
    m.add_argument("--p", type=float, required=True)
    m.add_argument("--trials", type=int, default=1000)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--n", type=int, default=None, help="grid size (default 256 in 1-d, 64 in 2-d)")
    m.add_argument("--c-lower-scale", type=float, default=1.0, help="multiply the lower constant (mutation probe)")
    m.set_defaults(func=cmd_maxprinciple)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except FracksError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
