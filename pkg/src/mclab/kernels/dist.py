"""Exact finite distributions over fixed-length bit strings."""
from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Sequence

from ..policy import BudgetExceeded
from . import LengthMismatch, Prob, all_strings, check_bits, fraction_str, parse_fraction

_LOGGER = logging.getLogger(__name__)

HALF = Fraction(1, 2)
DENSE_CAP = 24
EXACT_MAX_N = 16
FLOAT_MASS_TOL = 1e-12
FLOAT_CMP_TOL = 1e-9


@dataclass(frozen=True)
class BitStringDist:
    """Probability table over {0,1}^n; only the support is stored."""

    n: int
    probs: Mapping[str, Prob]
    mode: str = "exact"

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError("length must be non-negative")
        if self.mode not in {"exact", "float"}:
            raise ValueError(f"unknown arithmetic mode {self.mode!r}")
        cleaned: dict[str, Prob] = {}
        for x in sorted(self.probs):
            check_bits(x, self.n)
            raw = self.probs[x]
            p = Fraction(raw) if self.mode == "exact" else float(raw)
            if p < 0:
                raise ValueError(f"negative probability for {x}")
            if p:
                cleaned[x] = p
        total = sum(cleaned.values(), self._zero())
        if self.mode == "exact" and total != 1:
            raise ValueError(f"total mass is {total}, expected exactly 1")
        if self.mode == "float" and abs(total - 1.0) > FLOAT_MASS_TOL:
            raise ValueError(f"total mass is {total!r}, expected 1 within {FLOAT_MASS_TOL}")
        object.__setattr__(self, "probs", MappingProxyType(cleaned))

    def _zero(self) -> Prob:
        return Fraction(0) if self.mode == "exact" else 0.0

    @property
    def exact(self) -> bool:
        return self.mode == "exact"

    def prob(self, x: str) -> Prob:
        return self.probs.get(x, self._zero())

    def support(self) -> tuple[str, ...]:
        return tuple(self.probs)

    def items(self) -> Iterable[tuple[str, Prob]]:
        return self.probs.items()

    def total_mass(self) -> Prob:
        return sum(self.probs.values(), self._zero())

    @cached_property
    def prefix_masses(self) -> Mapping[str, Prob]:
        """Mass of every prefix of every support string (the empty prefix included)."""

        masses: dict[str, Prob] = defaultdict(self._zero)
        for x, p in self.probs.items():
            for i in range(self.n + 1):
                masses[x[:i]] += p
        return MappingProxyType(dict(masses))

    # -- constructors -------------------------------------------------------

    @classmethod
    def uniform(cls, n: int, mode: Optional[str] = None) -> "BitStringDist":
        _require_dense(n)
        mode = mode or default_mode(n)
        p = Fraction(1, 2**n) if mode == "exact" else 2.0**-n
        return cls(n, {x: p for x in all_strings(n)}, mode)

    @classmethod
    def point_mass(cls, x: str) -> "BitStringDist":
        return cls(len(x), {check_bits(x): Fraction(1)})

    @classmethod
    def bernoulli_product(cls, n: int, p: Prob, mode: Optional[str] = None) -> "BitStringDist":
        """Independent bits, each 1 with probability ``p``."""

        _require_dense(n)
        mode = mode or default_mode(n)
        p = Fraction(p) if mode == "exact" else float(p)
        table = {}
        for x in all_strings(n):
            ones = x.count("1")
            table[x] = p**ones * (1 - p) ** (n - ones)
        return cls(n, table, mode)

    @classmethod
    def from_counts(cls, n: int, counts: Mapping[str, int]) -> "BitStringDist":
        total = sum(counts.values())
        if total <= 0:
            raise ValueError("counts must have positive total")
        return cls(n, {x: Fraction(c, total) for x, c in counts.items() if c})

    @classmethod
    def from_weights(cls, n: int, weights: Mapping[str, Prob]) -> "BitStringDist":
        total = sum((Fraction(w) for w in weights.values()), Fraction(0))
        if total <= 0:
            raise ValueError("weights must have positive total")
        return cls(n, {x: Fraction(w) / total for x, w in weights.items()})

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "mode": self.mode,
            "entries": [[x, fraction_str(p)] for x, p in self.probs.items()],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "BitStringDist":
        mode = data.get("mode", "exact")
        entries = {x: parse_fraction(p) for x, p in data["entries"]}
        return cls(int(data["n"]), entries, mode)


def default_mode(n: int) -> str:
    """Exact rationals up to EXACT_MAX_N bits, binary64 beyond."""

    return "exact" if n <= EXACT_MAX_N else "float"


def _require_dense(n: int) -> None:
    if n > DENSE_CAP:
        raise BudgetExceeded(f"dense table over {n} bits exceeds the {DENSE_CAP}-bit cap")


def _same_length(d: BitStringDist, e: BitStringDist) -> None:
    if d.n != e.n:
        raise LengthMismatch(f"lengths differ: {d.n} vs {e.n}")


def _shared_mode(d: BitStringDist, e: BitStringDist) -> str:
    return "exact" if d.exact and e.exact else "float"


def load_dist(path: Path) -> BitStringDist:
    return BitStringDist.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def dump_dist(dist: BitStringDist, path: Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(dist.to_json(), indent=2), encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Combinators
# ---------------------------------------------------------------------------


def marginal(d: BitStringDist, prefix: str) -> Prob:
    check_bits(prefix)
    if len(prefix) > d.n:
        raise LengthMismatch(f"prefix of {len(prefix)} bits on a {d.n}-bit distribution")
    return d.prefix_masses.get(prefix, d._zero())


def statistical_distance(d: BitStringDist, e: BitStringDist) -> Prob:
    _same_length(d, e)
    keys = sorted(set(d.probs) | set(e.probs))
    if _shared_mode(d, e) == "exact":
        return sum((abs(d.prob(x) - e.prob(x)) for x in keys), Fraction(0)) / 2
    return math.fsum(abs(float(d.prob(x)) - float(e.prob(x))) for x in keys) / 2


def mixture(d: BitStringDist, e: BitStringDist, w: Prob) -> BitStringDist:
    """``w·d + (1−w)·e``."""

    _same_length(d, e)
    mode = _shared_mode(d, e)
    w = Fraction(w) if mode == "exact" else float(w)
    if not 0 <= w <= 1:
        raise ValueError("mixture weight must lie in [0, 1]")
    keys = sorted(set(d.probs) | set(e.probs))
    return BitStringDist(d.n, {x: w * d.prob(x) + (1 - w) * e.prob(x) for x in keys}, mode)


def product(d: BitStringDist, e: BitStringDist) -> BitStringDist:
    """Independent concatenation ``x || y``."""

    _require_dense(d.n + e.n)
    mode = _shared_mode(d, e)
    table = {x + y: p * q for x, p in d.items() for y, q in e.items()}
    return BitStringDist(d.n + e.n, table, mode)


def truncate(d: BitStringDist, n: int) -> BitStringDist:
    """Law of the first ``n`` bits."""

    if n > d.n:
        raise LengthMismatch(f"cannot truncate {d.n} bits to {n}")
    table: dict[str, Prob] = defaultdict(d._zero)
    for x, p in d.items():
        table[x[:n]] += p
    return BitStringDist(n, table, d.mode)


def parallel_repeat(d: BitStringDist, copies: int, cap: int = DENSE_CAP) -> BitStringDist:
    if copies < 1:
        raise ValueError("need at least one copy")
    if copies * d.n > cap:
        raise BudgetExceeded(
            f"{copies} copies of a {d.n}-bit table exceed the {cap}-bit cap; use product_sd"
        )
    return reduce(product, [d] * copies)


def product_sd(factors: Sequence[tuple[BitStringDist, BitStringDist]]) -> Fraction:
    """SD between two independent products, by DP over grouped likelihood pairs.

    ``factors`` lists ``(P_j, Q_j)`` block pairs; the result is SD(⊗P_j, ⊗Q_j).
    """

    states: Counter = Counter({(Fraction(1), Fraction(1)): 1})
    for p_dist, q_dist in factors:
        _same_length(p_dist, q_dist)
        groups = Counter(
            (Fraction(p_dist.prob(x)), Fraction(q_dist.prob(x)))
            for x in set(p_dist.probs) | set(q_dist.probs)
        )
        merged: Counter = Counter()
        for (pp, qq), mult in states.items():
            for (p, q), count in groups.items():
                merged[(pp * p, qq * q)] += mult * count
        states = merged
    _LOGGER.debug("product_sd finished with %d likelihood states", len(states))
    return sum((m * abs(pp - qq) for (pp, qq), m in states.items()), Fraction(0)) / 2


def parallel_repeat_sd(
    d: BitStringDist, copies: int, other: Optional[BitStringDist] = None
) -> Fraction:
    other = other if other is not None else BitStringDist.uniform(d.n)
    return product_sd([(d, other)] * copies)


@dataclass(frozen=True)
class AmplificationBound:
    """Exact SD of a repeated distribution next to the two lower bounds on it."""

    base_sd: Fraction
    copies: int
    exact_sd: Fraction
    stated_bound: float
    sound_bound: float
    degenerate: bool = field(default=False)

    @property
    def stated_holds(self) -> bool:
        return float(self.exact_sd) >= self.stated_bound - FLOAT_CMP_TOL

    @property
    def sound_holds(self) -> bool:
        return float(self.exact_sd) >= self.sound_bound - FLOAT_CMP_TOL


def amplification_bounds(d: BitStringDist, copies: int) -> AmplificationBound:
    """Compare SD(d^B, U^B) with 1 − exp(−B·SD) and 1 − exp(−B·SD²/2)."""

    base = Fraction(statistical_distance(d, BitStringDist.uniform(d.n)))
    exact_sd = parallel_repeat_sd(d, copies)
    return AmplificationBound(
        base_sd=base,
        copies=copies,
        exact_sd=exact_sd,
        stated_bound=1.0 - math.exp(-copies * float(base)),
        sound_bound=1.0 - math.exp(-copies * float(base) ** 2 / 2),
        degenerate=base == 0,
    )


# ---------------------------------------------------------------------------
# Chain rule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainFactorization:
    """Pr[y_i = 1 | y_1..y_{i-1}] for every prefix with positive mass."""

    n: int
    conditionals: Mapping[str, Fraction]

    def conditional(self, prefix: str) -> Fraction:
        """Probability that the bit after ``prefix`` is 1; zero-mass prefixes get 1/2."""

        return self.conditionals.get(prefix, HALF)

    def has_mass(self, prefix: str) -> bool:
        return prefix in self.conditionals

    def bit_probability(self, prefix: str, bit: str) -> Fraction:
        one = self.conditional(prefix)
        return one if bit == "1" else 1 - one

    def probability(self, y: str) -> Fraction:
        check_bits(y, self.n)
        result = Fraction(1)
        for i in range(self.n):
            result *= self.bit_probability(y[:i], y[i])
        return result


def chain_factorize(d: BitStringDist) -> ChainFactorization:
    if not d.exact:
        raise ValueError("chain factorization needs an exact distribution")
    masses = d.prefix_masses
    conditionals = {
        prefix: masses.get(prefix + "1", Fraction(0)) / mass
        for prefix, mass in masses.items()
        if len(prefix) < d.n and mass > 0
    }
    return ChainFactorization(d.n, MappingProxyType(conditionals))


def conditional_mass_bound(d: BitStringDist, a: Prob) -> Fraction:
    """Mass of y whose chain has some ratio Pr[y_1..y_i]/Pr[y_1..y_{i-1}] below 1/(2a)."""

    a = Fraction(a)
    if a <= 0:
        raise ValueError("a must be positive")
    if not d.exact:
        raise ValueError("conditional mass bound needs an exact distribution")
    floor = 1 / (2 * a)
    masses = d.prefix_masses
    violating = Fraction(0)
    for y, p in d.items():
        if any(masses[y[: i + 1]] < floor * masses[y[:i]] for i in range(d.n)):
            violating += p
    return violating
