"""Command-line runner.

    modone <subcommand> --config run.json [--seed N] [--out DIR] [--threads N]

Exit status: 0 when every test passes, 1 when any test fails, 2 for an
invalid configuration.  Outputs (all written atomically):

    manifest.json       config echo, effective seed, package versions
    reports.csv         one row per test report, with seed, M and N
    report_M<M>.csv     the same rows split by M
    summary.json        structured reports and the overall verdict
    <extra>.csv         experiment tables (samples, sweeps, trends)
"""

from __future__ import annotations

import argparse
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import load_config
from .csvio import write_csv, write_json
from .errors import BatchFailure, ModoneError, QuadratureError
from .experiments import run_experiment

SUBCOMMANDS = {
    "simulate": "simulate",
    "test-uniformity": "uniformity",
    "joint-limit": "joint-limit",
    "tv-clt": "tv-clt",
    "density-sweep": "density-sweep",
    "benford": "benford",
    "resample-variance": "resample-variance",
    "check-integrability": "integrability",
}

REPORT_HEADER = ["name", "statistic", "threshold", "n", "pass", "seed", "M", "N"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modone", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path, help="JSON experiment config")
        sp.add_argument("--seed", default=None, help="overrides MODONE_SEED and the config seed")
        sp.add_argument("--out", type=Path, default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")
    return parser


def versions() -> dict:
    return {"modone": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def report_rows(outcome, cfg):
    return [[*r.to_row(), cfg.seed, M, cfg.N] for M, r in outcome.reports]


def write_outputs(out_dir: Path, cfg, outcome) -> None:
    write_json(out_dir / "manifest.json", {"experiment": cfg.experiment, "config": cfg.raw,
                                           "effective_seed": cfg.seed, "versions": versions()})
    rows = report_rows(outcome, cfg)
    write_csv(out_dir / "reports.csv", REPORT_HEADER, rows)
    for M in sorted({M for M, _ in outcome.reports}):
        write_csv(out_dir / f"report_M{M}.csv", REPORT_HEADER, [r for r in rows if r[6] == M])
    for name, (header, table) in outcome.tables.items():
        write_csv(out_dir / name, header, table)
    write_json(out_dir / "summary.json", {
        "experiment": cfg.experiment, "all_passed": outcome.passed, "seed": cfg.seed, "N": cfg.N,
        "reports": [{**r.to_dict(), "M": M} for M, r in outcome.reports]})


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    experiment = SUBCOMMANDS[args.command]
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, experiment, cli_seed=args.seed)
    except (ModoneError, TypeError, ValueError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out_dir = args.out or Path(cfg.output_path or f"modone-{args.command}")
    try:
        outcome = run_experiment(cfg, threads=args.threads)
    except (BatchFailure, QuadratureError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ModoneError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_outputs(out_dir, cfg, outcome)
    for M, r in outcome.reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status}  M={M:<8d} {r.name:<28s} {r.statistic:.6g} <= {r.threshold:.6g}")
    return EXIT_OK if outcome.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
