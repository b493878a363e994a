"""Harness interfaces: run logging, report records and their export."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Protocol

from ..kernels import Prob, fraction_str, parse_fraction

SCHEMA_VERSION = 1


class ConfigInvalid(ValueError):
    """Raised when an experiment config is malformed or references missing files."""


class SchemaMismatch(ValueError):
    """Raised when reports with different schema versions are merged."""


def _render(value: Any) -> Any:
    if value is None or isinstance(value, (bool, str, int)):
        return value
    return fraction_str(value)


def _parse(value: Any) -> Any:
    if value is None or isinstance(value, (bool, int)):
        return value
    if isinstance(value, str):
        try:
            return parse_fraction(value)
        except (ValueError, ZeroDivisionError):
            return value
    return parse_fraction(value)


@dataclass(frozen=True)
class ReportRow:
    """One checked inequality with its measured value, bound and verdict.

    Advisory rows record a comparison without letting it decide the exit status.
    """

    experiment: str
    n: int
    check: str
    claim: str
    measured: Prob
    bound: Optional[Prob]
    passed: bool
    params: dict[str, Any] = field(default_factory=dict)
    note: Optional[str] = None
    advisory: bool = False

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "n": self.n,
            "check": self.check,
            "claim": self.claim,
            "measured": _render(self.measured),
            "bound": _render(self.bound),
            "passed": self.passed,
            "params": {key: _render(value) for key, value in self.params.items()},
            "note": self.note,
            "advisory": self.advisory,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReportRow":
        return cls(
            experiment=data["experiment"],
            n=int(data["n"]),
            check=data["check"],
            claim=data["claim"],
            measured=_parse(data["measured"]),
            bound=_parse(data["bound"]),
            passed=bool(data["passed"]),
            params={key: _parse(value) for key, value in data.get("params", {}).items()},
            note=data.get("note"),
            advisory=bool(data.get("advisory", False)),
        )


@dataclass(frozen=True)
class ExperimentReport:
    experiment: str
    claims: tuple[str, ...]
    rows: tuple[ReportRow, ...]
    seed: int
    config_hash: str
    code_version: str
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return not self.failures()

    def failures(self) -> list[ReportRow]:
        """Failed rows that count toward the verdict; advisory rows never do."""

        return [row for row in self.rows if not row.passed and not row.advisory]

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "claims": list(self.claims),
            "provenance": {
                "seed": self.seed,
                "config_hash": self.config_hash,
                "code_version": self.code_version,
            },
            "passed": self.passed,
            "rows": [row.to_dict() for row in self.rows],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        provenance = data["provenance"]
        return cls(
            experiment=data["experiment"],
            claims=tuple(data["claims"]),
            rows=tuple(ReportRow.from_dict(row) for row in data["rows"]),
            seed=int(provenance["seed"]),
            config_hash=provenance["config_hash"],
            code_version=provenance["code_version"],
            schema_version=int(data["schema_version"]),
        )


class IntegrityLog(Protocol):
    def record(self, event: str, **context) -> None:
        ...


class ReportAgent(Protocol):
    reports_dir: Path

    def export(self, report: ExperimentReport) -> Path:
        ...

    def summarize(self, reports: Iterable[ExperimentReport]) -> tuple[Path, Path]:
        ...
