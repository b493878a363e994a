"""Shared interfaces, errors and helpers for the computational kernels."""
from __future__ import annotations

from fractions import Fraction
from itertools import product as _cartesian
from typing import TYPE_CHECKING, Iterator, Optional, Protocol, Union

import numpy as np

if TYPE_CHECKING:  # pragma: no cover
    from .dist import BitStringDist

Prob = Union[Fraction, float]


class LengthMismatch(ValueError):
    """Raised when two distributions or strings disagree on their length."""


class MachineTimeout(RuntimeError):
    """Raised when a program exhausts its step budget."""


class InvalidProgram(ValueError):
    """Raised when a program cannot be decoded or overflows the machine limits."""


class InvalidConfig(ValueError):
    """Raised when machine or kernel parameters are outside their valid range."""


class IndexOutOfRange(IndexError):
    """Raised when an index description asks for a member the set does not have."""


class OracleMiss(KeyError):
    """Raised when a string lies outside the region the oracle can certify."""


class NotTabular(TypeError):
    """Raised when an operation needs a conditional table and only sampling is available."""


class TooManyQubits(ValueError):
    """Raised when a circuit exceeds the simulator's qubit cap."""


class NoPreimage(LookupError):
    """Raised when an inverter is asked for an image nothing maps to."""


class PreconditionUnmet(RuntimeError):
    """Raised when a claim's hypothesis fails; ``report`` keeps what was measured."""

    def __init__(self, message: str, report: object = None) -> None:
        super().__init__(message)
        self.report = report


# ---------------------------------------------------------------------------
# Interfaces
# ---------------------------------------------------------------------------


class Sampler(Protocol):
    """Anything that emits n-bit strings and can expose its exact law."""

    n: int

    def sample(self, rng: np.random.Generator) -> str:
        ...

    def sample_many(self, rng: np.random.Generator, shots: int) -> list[str]:
        ...

    def exact_dist(self) -> "BitStringDist":
        ...


class Extrapolator(Protocol):
    """Next-bit sampler: given i and an (i-1)-bit prefix, emit bit i."""

    n: int
    slack: Prob

    def next_bit(self, i: int, prefix: str, rng: np.random.Generator) -> int:
        ...

    def count_ones(self, i: int, prefix: str, reps: int, rng: np.random.Generator) -> int:
        ...


class Inverter(Protocol):
    n: int
    slack: Prob

    def invert(self, image: tuple, rng: np.random.Generator) -> tuple[str, str]:
        ...


class Decider(Protocol):
    def accept_probability(self, x: str) -> Fraction:
        ...


# ---------------------------------------------------------------------------
# Bit strings
# ---------------------------------------------------------------------------


def check_bits(x: str, n: Optional[int] = None) -> str:
    if any(ch not in "01" for ch in x):
        raise ValueError(f"not a bit string: {x!r}")
    if n is not None and len(x) != n:
        raise LengthMismatch(f"expected {n} bits, got {len(x)}")
    return x


def all_strings(n: int) -> Iterator[str]:
    """Yield every n-bit string in lexicographic order."""

    for bits in _cartesian("01", repeat=n):
        yield "".join(bits)


def fraction_str(value: Prob) -> Union[str, float]:
    """Render exact values as ``"p/q"`` strings and leave floats alone."""

    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return f"{value}/1"
    return float(value)


def parse_fraction(raw: Union[str, float, int]) -> Prob:
    if isinstance(raw, str):
        return Fraction(raw)
    if isinstance(raw, int):
        return Fraction(raw)
    return float(raw)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Counter-based generator for ``seed`` and the substream addressed by ``stream``."""

    sequence = np.random.SeedSequence(seed, spawn_key=tuple(stream))
    return np.random.Generator(np.random.Philox(sequence))


__all__ = [
    "Decider",
    "Extrapolator",
    "IndexOutOfRange",
    "InvalidConfig",
    "InvalidProgram",
    "Inverter",
    "LengthMismatch",
    "MachineTimeout",
    "NoPreimage",
    "NotTabular",
    "OracleMiss",
    "PreconditionUnmet",
    "Prob",
    "Sampler",
    "TooManyQubits",
    "all_strings",
    "check_bits",
    "fraction_str",
    "make_rng",
    "parse_fraction",
]
