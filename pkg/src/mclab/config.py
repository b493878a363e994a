"""Configuration helpers for the lab."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional
import os


@dataclass(frozen=True)
class Settings:
    """Runtime configuration derived from environment variables."""

    output_dir: Path = Path(os.getenv("MCLAB_OUTPUT_DIR", "./outputs")).expanduser()
    budget: int = int(os.getenv("MCLAB_BUDGET", str(2**25)))
    max_parallel: int = int(os.getenv("MCLAB_MAX_PARALLEL", "1"))
    hash_algo: str = os.getenv("MCLAB_HASH_ALGO", "sha256")
    exact_cap: int = int(os.getenv("MCLAB_EXACT_CAP", "24"))
    log_level: str = os.getenv("MCLAB_LOG_LEVEL", "INFO")

    def session_log(self, output_dir: Optional[Path] = None) -> Path:
        """JSON-lines run log under ``output_dir`` (default: the configured one)."""

        return Path(output_dir or self.output_dir) / "logs" / "session.jsonl"


SETTINGS = Settings()
