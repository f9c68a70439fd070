"""Command-line runner for miss-probability sweeps.

Exit status is 0 on success, 2 for configuration or I/O problems and 3 when
a numerical routine fails.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import beams as bm
from .errors import ConfigError, NumericalError
from .sim import Scenario, build_codebook, emit_results, load_scenario, run_fa_calibration, run_miss_sweep

log = logging.getLogger("mmwdisc")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmwdisc", description=__doc__.splitlines()[0])
    p.add_argument("--scenario", help="scenario JSON file (defaults apply when omitted)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per (L, condition)")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--out", help="output file (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on this)")
    p.add_argument("--codebook", help="codebook JSON to use instead of designing one")
    p.add_argument("--mode", choices=("miss", "fa"), default="miss",
                   help="miss-probability sweep or false-alarm calibration")
    p.add_argument("--save-codebook", metavar="PATH", help="write the scenario's codebook as JSON and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _scenario(args) -> Scenario:
    sc = load_scenario(args.scenario) if args.scenario else Scenario()
    over = {}
    if args.trials is not None:
        over["trials"] = args.trials
    if args.seed is not None:
        over["master_seed"] = args.seed
    return replace(sc, **over) if over else sc


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        sc = _scenario(args)
        cb = bm.load_codebook(args.codebook) if args.codebook else None
        if args.save_codebook:
            built = build_codebook(sc, cb)
            if built is None:
                raise ConfigError("a per-slot random codebook has no fixed beams to save")
            bm.save_codebook(built, args.save_codebook)
            return EXIT_OK
        log.info("running %s with %d trials, seed %d", sc.scenario_id, sc.trials, sc.master_seed)
        if args.mode == "fa":
            rows = [run_fa_calibration(sc, workers=args.workers)]
        else:
            rows = run_miss_sweep(sc, workers=args.workers, codebook=cb)
        text = emit_results(rows, args.format, args.out)
        if args.out is None:
            sys.stdout.write(text)
    except (ConfigError, OSError) as exc:
        print(f"mmwdisc: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"mmwdisc: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(run())
