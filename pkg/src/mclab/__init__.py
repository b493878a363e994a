"""Simulation and verification lab for meta-complexity reductions."""

from __future__ import annotations

from importlib import metadata as importlib_metadata


def _detect_version() -> str:
    """Return the installed package version if available."""

    try:
        return importlib_metadata.version("mclab")
    except importlib_metadata.PackageNotFoundError:
        # Source checkouts without an install. Keep in sync with ``pyproject.toml``.
        return "0.1.0"


__all__ = ["__version__"]
__version__ = _detect_version()
