"""Extrapolators and the chain-rule probability estimator built on them."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import Extrapolator, NotTabular, Prob, check_bits, fraction_str, make_rng
from .dist import BitStringDist, ChainFactorization, chain_factorize

_LOGGER = logging.getLogger(__name__)

NOISE_MODES = ("toward_zero", "toward_one", "random")


@dataclass(frozen=True)
class EstimateConfig:
    """Repetitions per index plus the analysis parameters a, b, d, c and q."""

    reps: int
    a: Fraction
    b: Fraction
    d: Fraction
    c: Fraction = Fraction(11, 10)
    q: int = 1

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if Fraction(self.c) <= 1:
            raise ValueError("the multiplicative target c must exceed 1")
        if min(Fraction(self.a), Fraction(self.b), Fraction(self.d)) <= 0:
            raise ValueError("a, b and d must be positive")
        for name in ("a", "b", "d", "c"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))

    @classmethod
    def for_length(
        cls, n: int, q: int = 1, reps: int = 10**5, c: Prob = Fraction(11, 10)
    ) -> "EstimateConfig":
        """Defaults a = n^{q+2}, b = d = n^{q+4}."""

        return cls(reps=reps, a=Fraction(n ** (q + 2)), b=Fraction(n ** (q + 4)),
                   d=Fraction(n ** (q + 4)), c=Fraction(c), q=q)

    def schema_bound(self, n: int) -> float:
        return 1.0 - 6.0 / n ** (self.q + 1)


# ---------------------------------------------------------------------------
# Extrapolators
# ---------------------------------------------------------------------------


class TabularExtrapolator:
    """Extrapolator whose next-bit law is an explicit conditional table."""

    n: int
    slack: Prob

    def conditional(self, i: int, prefix: str) -> Fraction:
        raise NotImplementedError

    def _checked(self, i: int, prefix: str) -> Fraction:
        if not 1 <= i <= self.n or len(prefix) != i - 1:
            raise ValueError(f"index {i} needs a prefix of {i - 1} bits")
        return self.conditional(i, prefix)

    def next_bit(self, i: int, prefix: str, rng: np.random.Generator) -> int:
        return int(rng.binomial(1, float(self._checked(i, prefix))))

    def count_ones(self, i: int, prefix: str, reps: int, rng: np.random.Generator) -> int:
        return int(rng.binomial(reps, float(self._checked(i, prefix))))


@dataclass
class ExactExtrapolator(TabularExtrapolator):
    chain: ChainFactorization
    slack: Prob = Fraction(0)

    @property
    def n(self) -> int:
        return self.chain.n

    def conditional(self, i: int, prefix: str) -> Fraction:
        return self.chain.conditional(prefix)


@dataclass
class NoisyExtrapolator(TabularExtrapolator):
    """True conditionals shifted by ``eps`` and clamped; ``targets`` limits where."""

    chain: ChainFactorization
    eps: Fraction
    mode: str = "toward_zero"
    seed: int = 0
    targets: Optional[frozenset[str]] = None
    _signs: dict[str, int] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        self.eps = Fraction(self.eps)
        if not 0 <= self.eps <= Fraction(1, 2):
            raise ValueError("eps must lie in [0, 1/2]")
        if self.mode not in NOISE_MODES:
            raise ValueError(f"mode must be one of {NOISE_MODES}")

    @property
    def n(self) -> int:
        return self.chain.n

    @property
    def slack(self) -> Fraction:
        return self.eps

    def _sign(self, prefix: str) -> int:
        if self.mode == "toward_zero":
            return -1
        if self.mode == "toward_one":
            return 1
        if prefix not in self._signs:
            rng = make_rng(self.seed, len(prefix), int(prefix, 2) if prefix else 0)
            self._signs[prefix] = 1 if rng.integers(2) else -1
        return self._signs[prefix]

    def conditional(self, i: int, prefix: str) -> Fraction:
        base = self.chain.conditional(prefix)
        if self.targets is not None and prefix not in self.targets:
            return base
        return min(Fraction(1), max(Fraction(0), base + self._sign(prefix) * self.eps))


def exact_extrapolator(d: BitStringDist) -> ExactExtrapolator:
    return ExactExtrapolator(chain_factorize(d))


def noisy_extrapolator(
    d: BitStringDist,
    eps: Prob,
    mode: str = "toward_zero",
    seed: int = 0,
    targets: Optional[Iterable[str]] = None,
) -> NoisyExtrapolator:
    return NoisyExtrapolator(
        chain_factorize(d), Fraction(eps), mode, seed, frozenset(targets) if targets else None
    )


def is_tabular(ext: Extrapolator) -> bool:
    return callable(getattr(ext, "conditional", None))


# ---------------------------------------------------------------------------
# Estimate
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EstimateResult:
    y: str
    reps: int
    ones: tuple[int, ...]
    p_tilde: tuple[Fraction, ...]
    product: Fraction
    off_support: bool
    seed: int
    stream: tuple[int, ...] = ()

    @property
    def counts(self) -> tuple[int, ...]:
        """Count_{y_1..y_{i-1}}(y_i) for every index."""

        return tuple(o if bit == "1" else self.reps - o for o, bit in zip(self.ones, self.y))

    def audit_records(self) -> list[dict]:
        return [
            {
                "y": self.y,
                "i": i,
                "count": count,
                "reps": self.reps,
                "p_tilde": fraction_str(p),
            }
            for i, (count, p) in enumerate(zip(self.counts, self.p_tilde), start=1)
        ]


def estimate(
    y: str, ext: Extrapolator, cfg: EstimateConfig, seed: int, stream: Sequence[int] = ()
) -> EstimateResult:
    """Run ``ext`` reps times per index on the prefixes of y and multiply the frequencies."""

    check_bits(y, ext.n)
    rng = make_rng(seed, *stream)
    ones, p_tilde = [], []
    product = Fraction(1)
    for i in range(1, ext.n + 1):
        one_count = ext.count_ones(i, y[: i - 1], cfg.reps, rng)
        count = one_count if y[i - 1] == "1" else cfg.reps - one_count
        p = Fraction(count, cfg.reps)
        ones.append(one_count)
        p_tilde.append(p)
        product *= p
    chain = getattr(ext, "chain", None)
    off_support = chain is not None and chain.probability(y) == 0
    return EstimateResult(
        y, cfg.reps, tuple(ones), tuple(p_tilde), product, off_support, seed, tuple(stream)
    )


def exact_substitution(y: str, ext: Extrapolator) -> Fraction:
    """The estimator's product with every p̃ replaced by the extrapolator's true conditional."""

    if not is_tabular(ext):
        raise NotTabular("exact substitution needs a conditional table")
    check_bits(y, ext.n)
    result = Fraction(1)
    for i in range(1, ext.n + 1):
        one = ext.conditional(i, y[: i - 1])
        result *= one if y[i - 1] == "1" else 1 - one
    return result


@dataclass(frozen=True)
class AccuracyReport:
    n: int
    weighted_pass_mass: Fraction
    schema_bound: float
    hoeffding_bound: float
    results: tuple[EstimateResult, ...] = field(repr=False)


def within_factor(value: Fraction, target: Fraction, c: Fraction) -> bool:
    return target / c <= value <= c * target


def estimate_accuracy(
    d: BitStringDist, ext: Extrapolator, cfg: EstimateConfig, seed: int
) -> AccuracyReport:
    """Mass of y with Pr[y]/c ≤ estimate ≤ c·Pr[y]; y number j uses substream (j,)."""

    results = []
    passed = Fraction(0)
    for j, (y, p) in enumerate(d.items()):
        result = estimate(y, ext, cfg, seed, (j,))
        results.append(result)
        if within_factor(result.product, Fraction(p), cfg.c):
            passed += Fraction(p)
    _LOGGER.debug("estimate accuracy over %d strings: %s", len(results), float(passed))
    return AccuracyReport(
        d.n, passed, cfg.schema_bound(d.n), hoeffding_failure_bound(cfg, d.n), tuple(results)
    )


# ---------------------------------------------------------------------------
# Claims
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InversionReport:
    violating_mass: Fraction
    per_index_sd: tuple[Fraction, ...]
    threshold: Fraction
    markov_bound: Fraction

    @property
    def holds(self) -> bool:
        return self.violating_mass <= self.markov_bound


def verify_claim_invert_is_high(d: BitStringDist, ext: Extrapolator, b: Prob) -> InversionReport:
    """Mass of y with some |Pr_ext[y_i | prefix] − Pr[y_i | prefix]| above b·slack."""

    if not is_tabular(ext):
        raise NotTabular("this check needs the extrapolator's conditional table")
    b = Fraction(b)
    chain = chain_factorize(d)
    threshold = b * Fraction(ext.slack)
    deviation: dict[str, Fraction] = {}
    per_index = [Fraction(0)] * d.n
    for prefix, mass in d.prefix_masses.items():
        if len(prefix) == d.n:
            continue
        gap = abs(ext.conditional(len(prefix) + 1, prefix) - chain.conditional(prefix))
        deviation[prefix] = gap
        per_index[len(prefix)] += mass * gap
    violating = sum(
        (p for y, p in d.items() if any(deviation[y[:i]] > threshold for i in range(d.n))),
        Fraction(0),
    )
    return InversionReport(violating, tuple(per_index), threshold, Fraction(d.n) / b)


def hoeffding_failure_bound(cfg: EstimateConfig, n: int) -> float:
    """2n·exp(−2·reps/d²)."""

    return 2 * n * math.exp(-2 * cfg.reps / float(cfg.d) ** 2)


@dataclass(frozen=True)
class HoeffdingTrial:
    failures: int
    trials: int
    bound: float

    @property
    def rate(self) -> float:
        return self.failures / self.trials


def hoeffding_trials(
    ext: Extrapolator, y: str, cfg: EstimateConfig, trials: int, seed: int
) -> HoeffdingTrial:
    """Fraction of trials where some index's frequency misses its conditional by over 1/d."""

    if not is_tabular(ext):
        raise NotTabular("the deviation experiment needs true conditionals")
    check_bits(y, ext.n)
    truth = np.array(
        [float(ext.conditional(i, y[: i - 1])) for i in range(1, ext.n + 1)], dtype=np.float64
    )
    rng = make_rng(seed)
    counts = rng.binomial(cfg.reps, truth, size=(trials, ext.n))
    deviations = np.abs(counts / cfg.reps - truth)
    failures = int(np.any(deviations > 1.0 / float(cfg.d), axis=1).sum())
    return HoeffdingTrial(failures, trials, hoeffding_failure_bound(cfg, ext.n))
