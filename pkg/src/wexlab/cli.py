"""Command-line entry point: ``wexlab run|scan|identities|list``.

Exit status is 0 when every check passes, 1 when any check does not and
2 for an invalid command line or scenario.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .report import VerificationReport
from .suites import SUITES, Scenario, ScenarioError, load_scenario, run_scenario

log = logging.getLogger("wexlab")

SCAN_SUITES = ("buckley-scan", "fs-vector-scan", "sparse-bound-scan", "marcinkiewicz")


def _scenario(args, suite: str | None) -> Scenario:
    base = {}
    if getattr(args, "config", None):
        base = load_scenario(args.config).to_dict()
    if suite is not None:
        if base.get("suite", suite) != suite:
            raise ScenarioError(f"--suite {suite} disagrees with the config suite {base['suite']}")
        base["suite"] = suite
    overrides = {
        "seed": getattr(args, "seed", None),
        "trials": getattr(args, "trials", None),
        "n_cells": getattr(args, "n_cells", None),
        "p": getattr(args, "p", None),
        "r": getattr(args, "r", None),
        "a_list": getattr(args, "a", None),
        "band": getattr(args, "band", None),
        "count": getattr(args, "count", None),
        "workers": getattr(args, "workers", None),
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    return Scenario.from_dict(base)


def _emit(rep: VerificationReport, args) -> int:
    print(rep.summary())
    for c in rep.checks:
        if not c.ok or args.verbose:
            print(f"  {c.status:<12} {c.name}: measured={c.measured} allowed={c.allowed}")
    if getattr(args, "out", None):
        rep.write_json(args.out)
        log.info("report written to %s", args.out)
    if getattr(args, "csv", None):
        rep.write_csv(args.csv)
        log.info("rows written to %s", args.csv)
    return 0 if rep.passed else 1


def _common(sp, *, config=True):
    if config:
        sp.add_argument("--config", help="JSON scenario file")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="write the JSON report here")
    sp.add_argument("--workers", type=int, help="threads for independent trials")
    sp.add_argument("-v", "--verbose", action="store_true", help="list every check")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wexlab", description="Weighted-inequality verification suites.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a verification suite")
    run.add_argument("--suite", required=True, choices=sorted(SUITES))
    run.add_argument("--trials", type=int)
    run.add_argument("--n-cells", type=int)
    _common(run)

    scan = sub.add_parser("scan", help="run a growth scan and write its rows as CSV")
    scan.add_argument("--suite", required=True, choices=SCAN_SUITES)
    scan.add_argument("--p")
    scan.add_argument("--r")
    scan.add_argument("--a", type=float, nargs="+", help="scan parameters")
    scan.add_argument("--band", type=float, nargs=2, metavar=("LO", "HI"),
                      help="acceptance band; checked only when given")
    scan.add_argument("--trials", type=int)
    scan.add_argument("--n-cells", type=int)
    scan.add_argument("--csv", help="write scan rows here")
    _common(scan)

    ids = sub.add_parser("identities", help="exact exponent identities on random rational tuples")
    ids.add_argument("--count", type=int, default=1000)
    _common(ids, config=False)

    sub.add_parser("list", help="list suites and their defaults")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "list":
        for name, suite in SUITES.items():
            print(f"{name}: {json.dumps(suite.defaults, sort_keys=True)}")
        return 0
    suite = "exponent-identities" if args.command == "identities" else args.suite
    try:
        sc = _scenario(args, suite)
        rep = run_scenario(sc)
    except ScenarioError as exc:
        print(f"wexlab: invalid scenario: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"wexlab: {exc}", file=sys.stderr)
        return 2
    return _emit(rep, args)


if __name__ == "__main__":
    sys.exit(main())
