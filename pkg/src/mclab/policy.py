"""Budget gate keeping exhaustive enumerations under the configured ceiling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


class BudgetExceeded(RuntimeError):
    """Raised when an enumeration would run more work than the ceiling allows."""


DEFAULT_CEILING = 2**25


@dataclass
class BudgetGate:
    """Simple helper deciding whether an enumeration of a given size may run."""

    ceiling: int = DEFAULT_CEILING

    def require(self, capability: str, work: int) -> None:
        """Ensure ``work`` units for ``capability`` fit under the ceiling."""

        if work > self.ceiling:
            raise BudgetExceeded(
                f"{capability} needs {work} executions, above the ceiling of {self.ceiling}. "
                "Raise MCLAB_BUDGET to opt in."
            )

    def describe_capabilities(self) -> Iterable[str]:
        yield f"Enumeration ceiling is {self.ceiling} program executions."
        if self.ceiling > DEFAULT_CEILING:
            yield "Ceiling raised above the default through MCLAB_BUDGET."
