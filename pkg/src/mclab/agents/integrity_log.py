"""Integrity log agent writing JSON lines."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable

from . import IntegrityLog


@dataclass
class JsonlIntegrityLog(IntegrityLog):
    """Appends ``{ts, event, context}`` records; ``stamp=False`` drops the timestamp."""

    log_file: Path
    stamp: bool = True
    _file_handle: Any = field(init=False, repr=False, default=None)

    def _ensure_handle(self) -> None:
        if self._file_handle is None:
            self.log_file.parent.mkdir(parents=True, exist_ok=True)
            self._file_handle = self.log_file.open("a", encoding="utf-8")

    def record(self, event: str, **context: Dict[str, Any]) -> None:
        self._ensure_handle()
        entry: dict[str, Any] = {"event": event, "context": context}
        if self.stamp:
            entry = {"ts": datetime.now(timezone.utc).isoformat(), **entry}
        self._file_handle.write(json.dumps(entry, sort_keys=not self.stamp) + "\n")
        self._file_handle.flush()

    def record_many(self, event: str, contexts: Iterable[dict]) -> None:
        for context in contexts:
            self.record(event, **context)

    def close(self) -> None:
        if self._file_handle is not None:
            self._file_handle.close()
            self._file_handle = None
