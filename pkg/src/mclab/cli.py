"""Command line interface for the meta-complexity lab."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .agents import ConfigInvalid, SchemaMismatch
from .agents.golden import GoldenVerifier
from .agents.integrity_log import JsonlIntegrityLog
from .agents.report_agent import JsonReportAgent
from .config import SETTINGS
from .experiments import EXPERIMENTS, ExperimentConfig, load_machine_config
from .kernels import InvalidConfig
from .orchestrator import Orchestrator
from .policy import BudgetExceeded, BudgetGate

EXIT_OK = 0
EXIT_FAILED = 2
EXIT_CONFIG = 3
EXIT_BUDGET = 4


def build_orchestrator(output_dir: Path, max_parallel: int = SETTINGS.max_parallel) -> Orchestrator:
    output_dir = Path(output_dir)
    return Orchestrator(
        integrity_log=JsonlIntegrityLog(log_file=SETTINGS.session_log(output_dir)),
        reporter=JsonReportAgent(reports_dir=output_dir),
        golden=GoldenVerifier(),
        policy=BudgetGate(ceiling=SETTINGS.budget),
        max_parallel=max_parallel,
    )


def cmd_oracle_build(args: argparse.Namespace) -> int:
    machine, out = load_machine_config(Path(args.config))
    if args.out:
        out = Path(args.out)
    orchestrator = build_orchestrator(out.parent, args.workers)
    binary, table = orchestrator.save_oracle(machine, out)
    print(f"oracle written to {binary} ({table})")
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    changes = {"experiment": args.experiment, "seed": args.seed, "output_dir": args.out}
    if args.config:
        cfg = ExperimentConfig.load(Path(args.config), **changes)
    else:
        if not args.experiment:
            raise ConfigInvalid("--experiment is required without --config")
        cfg = ExperimentConfig.from_mapping({}, **changes)
    orchestrator = build_orchestrator(cfg.output_dir, args.workers)
    report, path = orchestrator.run(cfg, record_golden=args.record_golden, audit=not args.no_audit)
    failures = report.failures()
    print(f"{cfg.experiment}: {len(report.rows)} rows, {len(failures)} failed -> {path}")
    for row in failures:
        print(f"  FAIL n={row.n} {row.check} ({row.claim}): measured {row.measured} vs {row.bound}")
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_summarize(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise ConfigInvalid(f"{directory} is not a directory")
    csv_path, json_path = build_orchestrator(directory).summarize(directory)
    print(f"summary written to {csv_path} and {json_path}")
    return EXIT_OK


def cmd_verify_golden(args: argparse.Namespace) -> int:
    directory = Path(args.directory)
    result = build_orchestrator(directory).verify_golden(directory)
    for name in result.failed_files:
        print(f"  changed: {name}")
    for name in result.missing_files:
        print(f"  missing: {name}")
    print(f"{result.checked_files} golden files checked, {'ok' if result.ok else 'MISMATCH'}")
    return EXIT_OK if result.ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Meta-complexity reduction lab")
    parser.add_argument("--version", "-V", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--workers",
        type=int,
        default=SETTINGS.max_parallel,
        help="Parallel workers for oracle builds and experiment cells",
    )

    subparsers = parser.add_subparsers(dest="command", required=True)

    oracle = subparsers.add_parser("oracle", help="Kolmogorov oracle tables")
    oracle_sub = oracle.add_subparsers(dest="oracle_command", required=True)
    oracle_build = oracle_sub.add_parser("build", help="Enumerate programs and save a KTO1 table")
    oracle_build.add_argument("--config", required=True, help="TOML file with an [oracle] table")
    oracle_build.add_argument("--out", required=False, help="Output path (default: config 'out')")
    oracle_build.set_defaults(func=cmd_oracle_build)

    run = subparsers.add_parser("run", help="Run one experiment over its n-grid")
    run.add_argument("--experiment", choices=sorted(EXPERIMENTS), required=False)
    run.add_argument("--config", required=False, help="TOML experiment config")
    run.add_argument("--seed", type=int, required=False, help="Master seed (u64)")
    run.add_argument("--out", type=Path, required=False, help="Output directory")
    run.add_argument("--record-golden", action="store_true", help="Record report digests in golden.json")
    run.add_argument("--no-audit", action="store_true", help="Skip the per-index estimate audit logs")
    run.set_defaults(func=cmd_run)

    summarize = subparsers.add_parser("summarize", help="Merge reports into summary.csv/json")
    summarize.add_argument("directory")
    summarize.set_defaults(func=cmd_summarize)

    verify = subparsers.add_parser("verify-golden", help="Re-hash reports against golden.json")
    verify.add_argument("directory")
    verify.set_defaults(func=cmd_verify_golden)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, SETTINGS.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigInvalid, InvalidConfig, SchemaMismatch, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
