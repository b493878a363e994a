"""GapK promise-problem instances, deciders and exact error accounting."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional

from . import Decider, InvalidConfig, OracleMiss, Prob, check_bits
from .dist import BitStringDist
from .sampler import corpus_dist
from .utm import (
    KolmogorovOracle,
    Program,
    UtmConfig,
    describe_all,
    description_overhead,
    high_set,
)

_LOGGER = logging.getLogger(__name__)


def default_gap(n: int) -> int:
    """Δ(n) = ⌈(log₂ n)²⌉, never below 1."""

    return max(1, math.ceil(math.log2(n) ** 2)) if n > 1 else 1


class Label(str, Enum):
    YES = "yes"
    NO = "no"
    PROMISE_VIOLATING = "promise_violating"


@dataclass(frozen=True)
class GapKParams:
    n: int
    s1: int
    s2: int
    gap: int
    eps: Fraction = Fraction(1, 2)

    def __post_init__(self) -> None:
        if self.gap < 1:
            raise InvalidConfig("the gap must be at least 1")
        if self.s2 - self.s1 < self.gap:
            raise InvalidConfig(f"s2 - s1 = {self.s2 - self.s1} is below the gap {self.gap}")

    @classmethod
    def preset(cls, n: int, eps: Prob = Fraction(1, 2), gap: Optional[int] = None) -> "GapKParams":
        """s1 = n − ⌈n^ε⌉ and s2 = s1 + Δ(n)."""

        gap = default_gap(n) if gap is None else gap
        s1 = n - math.ceil(n ** float(eps))
        return cls(n, s1, s1 + gap, gap, Fraction(eps))

    @classmethod
    def around(cls, n: int, s: int, gap: Optional[int] = None) -> "GapKParams":
        """The pair (s − Δ, s) a threshold decider at ``s`` targets."""

        gap = default_gap(n) if gap is None else gap
        return cls(n, s - gap, s, gap)

    def widened(self, extra: int) -> "GapKParams":
        """Raise s2 by ``extra`` with s1 fixed."""

        return replace(self, s2=self.s2 + extra, gap=self.gap + extra)

    def label(self, k: int) -> Label:
        if k <= self.s1:
            return Label.YES
        if k >= self.s2:
            return Label.NO
        return Label.PROMISE_VIOLATING


@dataclass(frozen=True)
class GapKInstance:
    x: str
    label: Label
    k_value: Optional[int]
    s1: int
    s2: int

    def to_json(self) -> dict:
        return {"x": self.x, "k": self.k_value, "label": self.label.value, "s1": self.s1, "s2": self.s2}


def label_instance(x: str, params: GapKParams, oracle: KolmogorovOracle) -> GapKInstance:
    """Label x by its K_T value; strings missing from the table have K_T > L_max."""

    check_bits(x, params.n)
    k = oracle.k_value(x)
    if k is not None:
        return GapKInstance(x, params.label(k), k, params.s1, params.s2)
    if params.s2 <= oracle.config.max_program_len + 1:
        return GapKInstance(x, Label.NO, None, params.s1, params.s2)
    raise OracleMiss(f"K_T({x}) exceeds L_max and s2={params.s2} cannot be certified")


def dump_instances(instances: Iterable[GapKInstance], path: Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for instance in instances:
            handle.write(json.dumps(instance.to_json()) + "\n")
    return path


# ---------------------------------------------------------------------------
# Deciders
# ---------------------------------------------------------------------------


def clears_threshold(value: Prob, s: int, delta: int) -> bool:
    """value ≥ 2^{−s+Δ/2}, compared on squares so the half power stays exact."""

    if value < 0:
        raise ValueError("estimators must be non-negative")
    if isinstance(value, (Fraction, int)):
        return Fraction(value) ** 2 >= Fraction(2) ** (delta - 2 * s)
    return value * value >= 2.0 ** (delta - 2 * s)


def threshold_decider(x: str, estimator: Callable[[str], Prob], s: int, delta: int) -> str:
    return "yes" if clears_threshold(estimator(x), s, delta) else "no"


@dataclass(frozen=True)
class ThresholdDecider:
    estimator: Callable[[str], Prob]
    s: int
    delta: int

    def accept_probability(self, x: str) -> Fraction:
        return Fraction(int(clears_threshold(self.estimator(x), self.s, self.delta)))


@dataclass(frozen=True)
class PerfectDecider:
    """Says yes exactly on Yes instances."""

    params: GapKParams
    oracle: KolmogorovOracle

    def accept_probability(self, x: str) -> Fraction:
        return Fraction(int(label_instance(x, self.params, self.oracle).label is Label.YES))


@dataclass(frozen=True)
class CoinDecider:
    p: Fraction = Fraction(1, 2)

    def accept_probability(self, x: str) -> Fraction:
        return Fraction(self.p)


@dataclass(frozen=True)
class OracleLabelDecider:
    """Accepts when K_T(x) ≤ s1 or x owns a certified short description."""

    oracle: KolmogorovOracle
    s1: int
    descriptions: Mapping[str, Program] = field(default_factory=dict)

    @property
    def certificate_length(self) -> int:
        return max((p.length for p in self.descriptions.values()), default=0)

    def accept_probability(self, x: str) -> Fraction:
        k = self.oracle.k_value(x)
        return Fraction(int((k is not None and k <= self.s1) or x in self.descriptions))


# ---------------------------------------------------------------------------
# Error accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeciderErrorReport:
    yes_error_mass: Fraction
    no_error_mass: Fraction
    schema: str
    bound: Optional[Prob] = None
    within_bound: Optional[bool] = None

    @property
    def total(self) -> Fraction:
        return self.yes_error_mass + self.no_error_mass


def _error_masses(
    decider: Decider, q: BitStringDist, params: GapKParams, oracle: KolmogorovOracle
) -> tuple[Fraction, Fraction]:
    if not q.exact:
        raise ValueError("error accounting needs an exact instance distribution")
    yes_error = no_error = Fraction(0)
    for x, p in q.items():
        label = label_instance(x, params, oracle).label
        if label is Label.YES:
            yes_error += p * (1 - decider.accept_probability(x))
        elif label is Label.NO:
            no_error += p * decider.accept_probability(x)
    return yes_error, no_error


def exact_error_account(
    decider: Decider,
    q: BitStringDist,
    params: GapKParams,
    oracle: KolmogorovOracle,
    bound: Optional[Prob] = None,
) -> DeciderErrorReport:
    """Both error masses by exact summation; ``within_bound`` is total ≤ bound."""

    yes_error, no_error = _error_masses(decider, q, params, oracle)
    within = None if bound is None else yes_error + no_error <= bound
    return DeciderErrorReport(yes_error, no_error, "weak", bound, within)


def strong_error_account(
    decider: Decider, q: BitStringDist, params: GapKParams, oracle: KolmogorovOracle, k: int = 1
) -> DeciderErrorReport:
    """Masses compared with 1/2 − 1/n^k; ``within_bound`` means the decider errs at least that much."""

    yes_error, no_error = _error_masses(decider, q, params, oracle)
    bound = Fraction(1, 2) - Fraction(1, params.n**k)
    return DeciderErrorReport(yes_error, no_error, "strong", bound, yes_error + no_error >= bound)


def yes_error_within(mass: Fraction, delta: int) -> bool:
    """mass ≤ 2^{−Δ/3}, decided on cubes."""

    return Fraction(mass) ** 3 <= Fraction(1, 2**delta)


# ---------------------------------------------------------------------------
# Band analysis
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BandReport:
    s: int
    delta: int
    low: frozenset[str]
    high: frozenset[str]
    band: frozenset[str]
    error_support: frozenset[str]
    low_mass: Fraction
    high_size: int

    @property
    def outside(self) -> frozenset[str]:
        """Erring strings that are in none of the band, Low or High."""

        return self.error_support - (self.band | self.low | self.high)

    @property
    def low_count_bound(self) -> int:
        return 2 ** (self.s - self.delta + 1) if self.s - self.delta + 1 >= 0 else 0

    @property
    def high_size_holds(self) -> bool:
        return self.high_size <= high_size_cap(self.s, self.delta)


def band_report(
    decider: Decider, q: BitStringDist, params: GapKParams, oracle: KolmogorovOracle, s: int, delta: int
) -> BandReport:
    """Sets around the threshold 2^{−s+Δ/2} next to the decider's error support."""

    thr_sq = Fraction(2) ** (delta - 2 * s)
    lower_sq = Fraction(99, 100) ** 2 * thr_sq
    upper_sq = Fraction(100, 99) ** 2 * thr_sq
    low, high, band, errors = set(), set(), set(), set()
    low_mass = Fraction(0)
    for x, p in q.items():
        instance = label_instance(x, params, oracle)
        sq = p * p
        if lower_sq <= sq < upper_sq:
            band.add(x)
        if sq >= lower_sq:
            high.add(x)
        if sq < upper_sq and instance.k_value is not None and instance.k_value <= s - delta:
            low.add(x)
            low_mass += p
        accept = decider.accept_probability(x)
        if (instance.label is Label.YES and accept < 1) or (instance.label is Label.NO and accept > 0):
            errors.add(x)
    return BandReport(
        s, delta, frozenset(low), frozenset(high), frozenset(band), frozenset(errors), low_mass, len(high)
    )



def high_size_cap(s: int, delta: int) -> int:
    """⌊(100/99)·2^{s−Δ/2}⌋, the most members a High set can have."""

    return math.isqrt(math.floor(Fraction(100, 99) ** 2 * Fraction(2) ** (2 * s - delta)))


@dataclass(frozen=True)
class HighDescriptionReport:
    """High members against the folded threshold s2' = overhead + index width bound + 1."""

    sampler: str
    n: int
    s: int
    delta: int
    high_size: int
    overhead: int
    index_bits: int
    index_width_bound: int
    longest: int
    uncovered_mass: Fraction
    no_error_mass: Fraction

    @property
    def folded_threshold(self) -> int:
        return self.overhead + self.index_width_bound + 1

    @property
    def size_holds(self) -> bool:
        return self.high_size <= high_size_cap(self.s, self.delta)

    @property
    def holds(self) -> bool:
        return self.size_holds and self.uncovered_mass == 0 and self.no_error_mass == 0


def verify_high_descriptions(
    sampler: str,
    n: int,
    s: int,
    delta: int,
    cfg: UtmConfig,
    oracle: Optional[KolmogorovOracle] = None,
    decider: Optional[Decider] = None,
) -> HighDescriptionReport:
    """Check that no High member can be a No instance once the encoder overhead is folded in.

    The folded threshold depends only on the encoding of (sampler, n, s, Δ) and on the size
    bound |High| ≤ (100/99)·2^{s−Δ/2}, never on the descriptions actually built. A member is
    uncovered when neither its description nor the oracle shows K_T below the threshold;
    ``no_error_mass`` is the decider's acceptance mass on uncovered members.
    """

    q = corpus_dist(sampler, n)
    members = high_set(sampler, n, s, delta)
    programs = describe_all(sampler, n, (s, delta), cfg) if members else {}
    overhead = description_overhead(sampler, n, (s, delta), cfg)
    cap = high_size_cap(s, delta)
    width_bound = (cap - 1).bit_length() if cap > 1 else 0
    folded = overhead + width_bound + 1
    uncovered = no_error = Fraction(0)
    for y in members:
        known = [programs[y].length] if y in programs else []
        if oracle is not None and oracle.k_value(y) is not None:
            known.append(oracle.k_value(y))
        if known and min(known) < folded:
            continue
        uncovered += q.prob(y)
        if decider is not None:
            no_error += q.prob(y) * decider.accept_probability(y)
    _LOGGER.debug(
        "High(%s, n=%d, s=%d, Δ=%d) has %d members, folded threshold %d",
        sampler,
        n,
        s,
        delta,
        len(members),
        folded,
    )
    return HighDescriptionReport(
        sampler,
        n,
        s,
        delta,
        len(members),
        overhead,
        (len(members) - 1).bit_length() if len(members) > 1 else 0,
        width_bound,
        max((p.length for p in programs.values()), default=0),
        uncovered,
        no_error,
    )
