"""High level orchestrator running experiments and managing their artifacts."""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from . import __version__
from .agents import ConfigInvalid, ExperimentReport, IntegrityLog, ReportAgent
from .agents.golden import GoldenReport, GoldenVerifier
from .agents.integrity_log import JsonlIntegrityLog
from .agents.report_agent import load_reports
from .experiments import EXPERIMENTS, CellContext, ExperimentConfig, cell_seed, claims_for
from .kernels import InvalidConfig
from .kernels.utm import KolmogorovOracle, UtmConfig, build_oracle, export_csv, load_oracle, save_oracle
from .policy import BudgetExceeded, BudgetGate

_LOGGER = logging.getLogger(__name__)


@dataclass
class Orchestrator:
    integrity_log: IntegrityLog
    reporter: ReportAgent
    golden: GoldenVerifier
    policy: BudgetGate
    max_parallel: int = 1
    _oracles: dict = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def _budget_denied(self, exc: BudgetExceeded, experiment: str) -> BudgetExceeded:
        """Record a refused enumeration and hand back an error naming the override."""

        self.integrity_log.record("budget_denied", experiment=experiment, reason=str(exc))
        return BudgetExceeded(f"{exc} (current ceiling {self.policy.ceiling}; set MCLAB_BUDGET)")

    def _config_denied(self, exc: Exception, experiment: str) -> ConfigInvalid:
        self.integrity_log.record("config_invalid", experiment=experiment, reason=str(exc))
        return ConfigInvalid(str(exc))

    # -- oracles ----------------------------------------------------------------

    def build_machine_oracle(self, machine: UtmConfig) -> KolmogorovOracle:
        with self._lock:
            cached = self._oracles.get(machine)
            if cached is not None:
                return cached
            self.integrity_log.record("oracle_build_start", **machine.to_json())
            oracle = build_oracle(machine, self.policy, workers=self.max_parallel)
            self.integrity_log.record("oracle_build_complete", strings=len(oracle))
            self._oracles[machine] = oracle
            return oracle

    def oracle_for(self, cfg: ExperimentConfig) -> KolmogorovOracle:
        path = cfg.oracle.get("path")
        if path is None:
            return self.build_machine_oracle(cfg.oracle_config())
        with self._lock:
            if path not in self._oracles:
                try:
                    self._oracles[path] = load_oracle(Path(path))
                except (OSError, ValueError) as exc:
                    raise ConfigInvalid(f"cannot load oracle {path}: {exc}") from exc
                self.integrity_log.record("oracle_loaded", path=str(path), strings=len(self._oracles[path]))
            return self._oracles[path]

    def save_oracle(self, machine: UtmConfig, out: Path) -> tuple[Path, Path]:
        """Build (or reuse) the oracle for ``machine`` and write its KTO1 file plus a CSV export."""

        oracle = self.build_machine_oracle(machine)
        binary = save_oracle(oracle, out)
        table = export_csv(oracle, out.with_suffix(".csv"))
        self.integrity_log.record("oracle_saved", path=str(binary), csv=str(table))
        return binary, table

    # -- experiments ------------------------------------------------------------

    def _audit_log(self, experiment: str, n: int) -> JsonlIntegrityLog:
        path = self.reporter.reports_dir / "audit" / f"{experiment}_n{n}.jsonl"
        path.unlink(missing_ok=True)
        return JsonlIntegrityLog(path, stamp=False)

    def _contexts(self, cfg: ExperimentConfig, audit: bool) -> list[CellContext]:
        params = cfg.params
        contexts = []
        for index, n in enumerate(cfg.n_grid):
            contexts.append(
                CellContext(
                    experiment=cfg.experiment,
                    n=n,
                    index=index,
                    seed=cell_seed(cfg.seed, index),
                    params=params,
                    oracle_provider=lambda: self.oracle_for(cfg),
                    gate=self.policy,
                    audit=self._audit_log(cfg.experiment, n) if audit else None,
                )
            )
        return contexts

    def _run_cell(self, ctx: CellContext) -> list:
        _LOGGER.info("%s cell n=%d starting", ctx.experiment, ctx.n)
        try:
            rows = EXPERIMENTS[ctx.experiment].run(ctx)
        finally:
            if ctx.audit is not None:
                ctx.audit.close()
        failed = sum(1 for row in rows if not row.passed and not row.advisory)
        self.integrity_log.record(
            "cell_complete", experiment=ctx.experiment, n=ctx.n, rows=len(rows), failed=failed
        )
        _LOGGER.info("%s cell n=%d finished: %d rows, %d failed", ctx.experiment, ctx.n, len(rows), failed)
        return rows

    def run(
        self, cfg: ExperimentConfig, record_golden: bool = False, audit: bool = True
    ) -> tuple[ExperimentReport, Path]:
        """Run every (experiment, n) cell and write ``<experiment>.json`` atomically."""

        self.integrity_log.record(
            "run_start",
            experiment=cfg.experiment,
            n_grid=list(cfg.n_grid),
            seed=cfg.seed,
            config_hash=cfg.config_hash(),
        )
        for capability in self.policy.describe_capabilities():
            self.integrity_log.record("policy", capability=capability)
        try:
            if cfg.spec.needs_oracle:
                self.oracle_for(cfg)
            contexts = self._contexts(cfg, audit)
            if self.max_parallel > 1 and len(contexts) > 1:
                with ThreadPoolExecutor(max_workers=self.max_parallel) as pool:
                    per_cell = list(pool.map(self._run_cell, contexts))
            else:
                per_cell = [self._run_cell(ctx) for ctx in contexts]
        except BudgetExceeded as exc:
            raise self._budget_denied(exc, cfg.experiment) from exc
        except (InvalidConfig, ConfigInvalid) as exc:
            raise self._config_denied(exc, cfg.experiment) from exc
        report = ExperimentReport(
            experiment=cfg.experiment,
            claims=claims_for(cfg.experiment),
            rows=tuple(row for rows in per_cell for row in rows),
            seed=cfg.seed,
            config_hash=cfg.config_hash(),
            code_version=__version__,
        )
        path = self.reporter.export(report)
        if record_golden:
            audit_files = sorted(
                f"audit/{p.name}" for p in (path.parent / "audit").glob(f"{cfg.experiment}_n*.jsonl")
            )
            self.golden.record(path.parent, [path.name, *audit_files])
        self.integrity_log.record(
            "run_complete",
            experiment=cfg.experiment,
            rows=len(report.rows),
            failed=len(report.failures()),
            report=str(path),
        )
        return report, path

    def summarize(self, directory: Path) -> tuple[Path, Path]:
        reports = load_reports(directory)
        csv_path, json_path = self.reporter.summarize(reports)
        self.integrity_log.record("summary", reports=len(reports), csv=str(csv_path))
        return csv_path, json_path

    def verify_golden(self, directory: Path) -> GoldenReport:
        result = self.golden.verify(directory)
        self.integrity_log.record(
            "golden_verify",
            ok=result.ok,
            checked=result.checked_files,
            failed=result.failed_files,
            missing=result.missing_files,
        )
        return result

