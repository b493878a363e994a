"""Report exporting agent."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from . import ExperimentReport, ReportAgent as ReportAgentProtocol, SchemaMismatch

SUMMARY_COLUMNS = ("experiment", "n", "rows", "passed", "failed", "advisory", "checks")


def atomic_write_text(path: Path, text: str) -> Path:
    """Write to a temporary sibling then move it over ``path``."""

    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def render_report(report: ExperimentReport) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def load_report(path: Path) -> ExperimentReport:
    return ExperimentReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_reports(directory: Path) -> list[ExperimentReport]:
    reports = []
    for path in sorted(Path(directory).glob("E*.json")):
        reports.append(load_report(path))
    return reports


def summary_rows(reports: Iterable[ExperimentReport]) -> list[dict]:
    reports = list(reports)
    versions = {report.schema_version for report in reports}
    if len(versions) > 1:
        raise SchemaMismatch(f"reports mix schema versions {sorted(versions)}")
    groups: dict[tuple[str, int], list] = {}
    for report in reports:
        for row in report.rows:
            groups.setdefault((report.experiment, row.n), []).append(row)
    summary = []
    for (experiment, n), rows in sorted(groups.items()):
        passed = sum(1 for row in rows if row.passed)
        advisory = sum(1 for row in rows if row.advisory and not row.passed)
        summary.append(
            {
                "experiment": experiment,
                "n": n,
                "rows": len(rows),
                "passed": passed,
                "failed": len(rows) - passed - advisory,
                "advisory": advisory,
                "checks": ";".join(sorted({row.check for row in rows})),
            }
        )
    return summary


@dataclass
class JsonReportAgent(ReportAgentProtocol):
    reports_dir: Path

    def report_path(self, experiment: str) -> Path:
        return self.reports_dir / f"{experiment}.json"

    def export(self, report: ExperimentReport) -> Path:
        return atomic_write_text(self.report_path(report.experiment), render_report(report))

    def summarize(self, reports: Iterable[ExperimentReport]) -> tuple[Path, Path]:
        """``summary.csv`` with one row per (experiment, n) and ``summary.json`` with every row."""

        reports = sorted(reports, key=lambda r: r.experiment)
        rows = summary_rows(reports)
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        csv_path = atomic_write_text(self.reports_dir / "summary.csv", buffer.getvalue())
        payload = {"groups": rows, "reports": [report.to_dict() for report in reports]}
        json_path = atomic_write_text(
            self.reports_dir / "summary.json", json.dumps(payload, indent=2, sort_keys=True) + "\n"
        )
        return csv_path, json_path
