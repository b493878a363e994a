"""Golden manifests: report digests recorded once and re-checked later."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List

from ..config import SETTINGS
from .report_agent import atomic_write_text

MANIFEST_NAME = "golden.json"


@dataclass
class GoldenReport:
    ok: bool
    checked_files: int
    failed_files: List[str] = field(default_factory=list)
    missing_files: List[str] = field(default_factory=list)


@dataclass
class GoldenVerifier:
    """Hash report files and compare them with ``golden.json``."""

    algorithm: str = SETTINGS.hash_algo

    def _hash_file(self, path: Path) -> str:
        hasher = hashlib.new(self.algorithm)
        with path.open("rb") as f:
            for chunk in iter(lambda: f.read(1024 * 1024), b""):
                hasher.update(chunk)
        return hasher.hexdigest()

    def record(self, directory: Path, names: Iterable[str]) -> Path:
        directory = Path(directory)
        manifest_path = directory / MANIFEST_NAME
        digests = {}
        if manifest_path.exists():
            digests = json.loads(manifest_path.read_text(encoding="utf-8"))["files"]
        for name in names:
            digests[name] = self._hash_file(directory / name)
        manifest = {"algorithm": self.algorithm, "files": dict(sorted(digests.items()))}
        return atomic_write_text(manifest_path, json.dumps(manifest, indent=2) + "\n")

    def verify(self, directory: Path) -> GoldenReport:
        directory = Path(directory)
        manifest = json.loads((directory / MANIFEST_NAME).read_text(encoding="utf-8"))
        algorithm = manifest.get("algorithm", self.algorithm)
        checker = GoldenVerifier(algorithm)
        failed: List[str] = []
        missing: List[str] = []
        for name, digest in manifest["files"].items():
            target = directory / name
            if not target.exists():
                missing.append(name)
                continue
            if checker._hash_file(target) != digest:
                failed.append(name)
        checked = len(manifest["files"]) - len(missing)
        return GoldenReport(not failed and not missing, checked, failed, missing)
