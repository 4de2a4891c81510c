"""Command line entry point.

    gsde bounds      --config c.json     closed-form constants (and bound table)
    gsde paths       --config c.json     dump (t, W, QV) for each simulated path
    gsde moments     --config c.json     moment bound check
    gsde increments  --config c.json     increment bound check
    gsde converge    --config c.json     strong-error bound check and order fit

Exit status: 0 pass, 1 bound violated, 2 bad configuration or usage,
3 runtime failure (exploding paths, I/O).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .. import bounds
from .config import ConfigError, load_config
from .experiments import (
    PathExplosion,
    convergence_experiment,
    increment_experiment,
    moment_experiment,
    paths_table,
)
from .report import ReportError, emit, fmt

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("gsde")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gsde",
        description="Euler-Maruyama simulation of G-SDEs against closed-form bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, help_ in [
        ("bounds", "print the closed-form constants"),
        ("paths", "write simulated G-Brownian paths"),
        ("moments", "check the second-moment bound"),
        ("increments", "check the increment bound"),
        ("converge", "check the strong-error bound and fit the order"),
    ]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, metavar="PATH", help="JSON config file")
        p.add_argument("--csv", metavar="PATH", help="override out.csv")
        p.add_argument("--json", metavar="PATH", help="override out.json")
        p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _bounds_doc(config):
    p = config.problem
    b = bounds.bound_set(p)
    doc = {
        "experiment": "bounds",
        "config": config.describe(),
        "G1": b.G1, "G2": b.G2, "K": b.K, "H1": b.H1,
        "log_K": b.log_K, "log_H1": b.log_H1,
        "astronomically_loose": b.loose,
    }
    q_list = list(config.q_list) or ([config.q] if config.q else [])
    if q_list:
        doc["table"] = [{"q": q, "bound": v, "log_bound": bounds.log_strong_error_bound(p, q)}
                        for q, v in bounds.bound_table(p, q_list)]
    return doc


def _summary(command, result) -> list[str]:
    if command == "bounds":
        lines = [f"{k}={fmt(result[k])}" for k in ("G1", "G2", "K", "H1")]
        if result["astronomically_loose"]:
            lines.append("warning: bound astronomically loose (above 1e300)")
        for row in result.get("table", []):
            lines.append(f"q={row['q']} bound={fmt(row['bound'])}")
        return lines
    if command == "moments":
        return [f"{s}={fmt(v)} K={fmt(k)} pass={fmt(ok)}" for s, v, k, ok in result.rows()]
    if command == "increments":
        return [f"H1={fmt(result.H1)}"] + [
            f"r={fmt(r.r)} t={fmt(r.t)} empirical={fmt(r.empirical)} "
            f"bound={fmt(r.bound)} pass={fmt(r.passed)}"
            for r in result.rows
        ]
    if command == "converge":
        lines = [
            f"q={r.q} mse={fmt(r.mse_empirical)} bound={fmt(r.bound)} ratio={fmt(r.ratio)}"
            for r in result.rows
        ]
        slope = "undefined" if result.slope is None else fmt(result.slope)
        lines.append(f"slope={slope} slope_ok={fmt(result.slope_ok)}")
        return lines
    return [f"{len(result)} rows"]


def run_cli(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG

    try:
        config = load_config(args.config)
        cmd = args.command
        if cmd == "bounds":
            result = _bounds_doc(config)
            passed = True
        elif cmd == "paths":
            result = paths_table(config)
            passed = True
        elif cmd == "moments":
            result = moment_experiment(config, threads=args.threads)
            passed = result.passed
        elif cmd == "increments":
            result = increment_experiment(config, threads=args.threads)
            passed = result.passed
        else:
            result = convergence_experiment(config, threads=args.threads)
            passed = result.passed
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PathExplosion as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        print(f"exploded_paths={exc.n_exploded}")
        return EXIT_RUNTIME

    for line in _summary(cmd, result):
        print(line)

    csv_path = args.csv or config.out_csv
    json_path = args.json or config.out_json
    try:
        if csv_path:
            emit(result, "csv", csv_path)
            log.info("wrote %s", csv_path)
        if json_path:
            emit(result, "json", json_path)
            log.info("wrote %s", json_path)
    except ReportError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    return EXIT_PASS if passed else EXIT_VIOLATION


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
