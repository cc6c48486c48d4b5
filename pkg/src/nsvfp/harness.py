"""Command-line harness, invoked as ``python -m nsvfp <subcommand> --config <path>``.

Subcommands: one per experiment, plus ``validate`` (parse only) and
``report`` (re-fit the tables of an earlier run).  Exit codes: 0 all checks
pass, 1 validation error, 2 runtime error, 3 an acceptance check failed.
"""

from __future__ import annotations

import argparse
import json
import sys

from threadpoolctl import threadpool_limits

from .config import EXPERIMENTS, load_config, parse_config
from .errors import ConfigError
from .experiments import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, report_experiment, run_experiment


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="python -m nsvfp", description="Run reproducible experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("validate", "report"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="JSON experiment configuration")
        s.add_argument("--out", help="output directory (overrides output_dir)")
        s.add_argument("--seed", type=int, help="seed for random data (overrides seed)")
        s.add_argument("--threads", type=int, help="cap on BLAS/OpenMP threads")
    return p


def _resolve(args):
    cfg = load_config(args.config)
    if args.command in EXPERIMENTS and cfg.experiment != args.command:
        raise ConfigError(f"config is for {cfg.experiment!r}, not {args.command!r}")
    if args.seed is not None or args.out is not None:
        data = cfg.to_dict()
        if args.seed is not None:
            data["seed"] = args.seed
        if args.out is not None:
            data["output_dir"] = args.out
        cfg = parse_config(data)
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_VALIDATION
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.command == "validate":
        print(cfg.to_json())
        return EXIT_OK
    limits = threadpool_limits(args.threads) if args.threads else None
    try:
        if args.command == "report":
            man, code = report_experiment(cfg)
        else:
            man, code = run_experiment(cfg)
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        if limits is not None:
            limits.restore_original_limits()
    if man.error:
        print(f"runtime error: {man.error}", file=sys.stderr)
    for name, ok in man.checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(json.dumps({"status": man.status, "output_dir": cfg.output_dir, "files": man.files}))
    return code
