from fractions import Fraction
import json
from pathlib import Path
import sys

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mclab.agents import ExperimentReport, ReportRow, SchemaMismatch
from mclab.agents.golden import GoldenVerifier
from mclab.agents.integrity_log import JsonlIntegrityLog
from mclab.agents.report_agent import (
    SUMMARY_COLUMNS,
    JsonReportAgent,
    atomic_write_text,
    load_report,
    load_reports,
    summary_rows,
)


def _row(n: int, check: str, passed: bool = True, advisory: bool = False) -> ReportRow:
    return ReportRow(
        "E6",
        n,
        check,
        "padding-amplification",
        Fraction(3, 7),
        0.25,
        passed,
        {"base": "bernoulli", "copies": 4, "base_sd": Fraction(5, 16)},
        None,
        advisory,
    )


def _report(*rows: ReportRow, schema_version: int = 1) -> ExperimentReport:
    return ExperimentReport(
        "E6", ("padding-amplification",), rows, 7, "abc123", "0.1.0", schema_version
    )


def test_rows_keep_exact_values_through_json():
    row = _row(8, "repetition")
    data = json.loads(json.dumps(row.to_dict()))
    assert data["measured"] == "3/7"
    assert data["params"]["copies"] == 4
    assert ReportRow.from_dict(data) == row


def test_advisory_failures_do_not_fail_the_report():
    report = _report(_row(8, "amplification_sound"), _row(8, "amplification_stated", False, True))
    assert report.passed
    assert report.failures() == []
    failing = _report(_row(8, "truncation", passed=False))
    assert not failing.passed
    assert [row.check for row in failing.failures()] == ["truncation"]


def test_export_is_loadable_and_leaves_no_temporaries(tmp_path):
    agent = JsonReportAgent(reports_dir=tmp_path)
    report = _report(_row(8, "repetition"), _row(12, "repetition"))
    path = agent.export(report)
    assert path == tmp_path / "E6.json"
    assert load_report(path) == report
    assert [p.name for p in tmp_path.iterdir()] == ["E6.json"]
    assert json.loads(path.read_text(encoding="utf-8"))["provenance"]["seed"] == 7


def test_atomic_write_replaces_existing_file(tmp_path):
    target = tmp_path / "nested" / "out.txt"
    atomic_write_text(target, "first")
    atomic_write_text(target, "second")
    assert target.read_text(encoding="utf-8") == "second"
    assert len(list(target.parent.iterdir())) == 1


def test_summary_groups_by_experiment_and_length(tmp_path):
    agent = JsonReportAgent(reports_dir=tmp_path)
    report = _report(_row(8, "repetition"), _row(8, "truncation", False), _row(12, "repetition"))
    rows = summary_rows([report])
    assert [(r["n"], r["rows"], r["failed"]) for r in rows] == [(8, 2, 1), (12, 1, 0)]
    assert rows[0]["checks"] == "repetition;truncation"

    csv_path, json_path = agent.summarize([report])
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(SUMMARY_COLUMNS)
    assert len(lines) == 3
    assert json.loads(json_path.read_text(encoding="utf-8"))["groups"] == rows


def test_summary_counts_advisory_rows_apart_from_failures(tmp_path):
    report = _report(_row(8, "amplification_sound"), _row(8, "amplification_stated", False, True))
    (group,) = summary_rows([report])
    assert (group["passed"], group["failed"], group["advisory"]) == (1, 0, 1)


def test_summary_json_parses_back_into_the_reports(tmp_path):
    reports = [
        _report(_row(8, "repetition"), _row(12, "truncation", False)),
        _report(_row(16, "amplification_stated", False, True)),
    ]
    _, json_path = JsonReportAgent(reports_dir=tmp_path).summarize(reports)
    payload = json.loads(json_path.read_text(encoding="utf-8"))
    assert [ExperimentReport.from_dict(data) for data in payload["reports"]] == reports


def test_empty_summary_has_only_a_header(tmp_path):
    csv_path, _ = JsonReportAgent(reports_dir=tmp_path).summarize([])
    assert csv_path.read_text(encoding="utf-8") == ",".join(SUMMARY_COLUMNS) + "\n"
    assert load_reports(tmp_path) == []


def test_mixed_schema_versions_are_refused():
    with pytest.raises(SchemaMismatch):
        summary_rows([_report(_row(8, "repetition")), _report(_row(8, "repetition"), schema_version=2)])


def test_unstamped_log_lines_are_reproducible(tmp_path):
    path = tmp_path / "audit" / "E1_n8.jsonl"
    log = JsonlIntegrityLog(path, stamp=False)
    log.record("estimate", y="0101", i=1, count=3)
    log.record_many("estimate", [{"y": "0101", "i": 2, "count": 4}])
    log.close()
    lines = [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines()]
    assert lines[0] == {"event": "estimate", "context": {"y": "0101", "i": 1, "count": 3}}
    assert all("ts" not in line for line in lines)

    stamped = JsonlIntegrityLog(tmp_path / "session.jsonl")
    stamped.record("run_start", experiment="E1")
    stamped.close()
    assert "ts" in json.loads((tmp_path / "session.jsonl").read_text(encoding="utf-8"))


def test_golden_manifest_detects_changes(tmp_path):
    (tmp_path / "E6.json").write_text("{}", encoding="utf-8")
    (tmp_path / "audit").mkdir()
    (tmp_path / "audit" / "E1_n8.jsonl").write_text("", encoding="utf-8")
    verifier = GoldenVerifier()
    verifier.record(tmp_path, ["E6.json", "audit/E1_n8.jsonl"])
    assert verifier.verify(tmp_path).ok

    (tmp_path / "E6.json").write_text('{"changed": true}', encoding="utf-8")
    (tmp_path / "audit" / "E1_n8.jsonl").unlink()
    result = verifier.verify(tmp_path)
    assert not result.ok
    assert result.failed_files == ["E6.json"]
    assert result.missing_files == ["audit/E1_n8.jsonl"]
    assert result.checked_files == 1
