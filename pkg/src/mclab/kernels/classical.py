"""Classical extrapolation through a distributional inverter of the prefix function.

f(r, i) = (i, x_1..x_i) with x = S(r). The index occupies a fixed ⌈log₂(n−1)⌉-bit field
after the seed; codes naming an index above n−1 map to the sentinel image (0, "0").
"""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from ..policy import BudgetExceeded, BudgetGate
from . import NoPreimage, Prob, all_strings, check_bits, fraction_str, make_rng
from .dist import BitStringDist, ChainFactorization, chain_factorize, statistical_distance
from .extrapolate import TabularExtrapolator
from .sampler import MAX_SEED_LEN, SeededSampler, seeded_from_json

_LOGGER = logging.getLogger(__name__)

Image = tuple[int, str]
Preimage = tuple[str, str]

SENTINEL: Image = (0, "0")


@dataclass(frozen=True)
class FnFamily:
    sampler: SeededSampler

    def __post_init__(self) -> None:
        if self.sampler.n < 2:
            raise ValueError("the prefix function needs outputs of at least 2 bits")

    @property
    def n(self) -> int:
        return self.sampler.n

    @property
    def seed_len(self) -> int:
        return self.sampler.seed_len

    @property
    def index_bits(self) -> int:
        """⌈log₂(n−1)⌉."""

        return (self.n - 2).bit_length()

    @property
    def input_len(self) -> int:
        return self.seed_len + self.index_bits

    def index_of(self, code: str) -> Optional[int]:
        i = (int(code, 2) if code else 0) + 1
        return i if i <= self.n - 1 else None

    def eval(self, r: str, code: str) -> Image:
        check_bits(code, self.index_bits)
        i = self.index_of(code)
        if i is None:
            return SENTINEL
        return i, self.sampler(r)[:i]

    def __call__(self, z: str) -> Image:
        check_bits(z, self.input_len)
        return self.eval(z[: self.seed_len], z[self.seed_len :])

    def codes(self) -> list[str]:
        return list(all_strings(self.index_bits))

    def preimage_table(self, gate: Optional[BudgetGate] = None) -> dict[Image, dict[Preimage, int]]:
        """Every input grouped by its image; S is evaluated once per seed."""

        if self.seed_len > MAX_SEED_LEN:
            raise BudgetExceeded(f"seed length {self.seed_len} above {MAX_SEED_LEN}")
        if gate is not None:
            gate.require(f"inverting f for {self.sampler.name}", 2**self.input_len)
        table: dict[Image, dict[Preimage, int]] = defaultdict(dict)
        codes = self.codes()
        for r in all_strings(self.seed_len):
            x = self.sampler(r)
            for code in codes:
                i = self.index_of(code)
                image = SENTINEL if i is None else (i, x[:i])
                table[image][(r, code)] = 1
        return dict(table)

    def image_dist(self) -> dict[Image, Fraction]:
        total = 2**self.input_len
        return {
            image: Fraction(len(pre), total) for image, pre in self.preimage_table().items()
        }


def load_family(path: Path) -> FnFamily:
    """``{"sampler": <inline seeded sampler or file name>}``."""

    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    ref = data["sampler"]
    if isinstance(ref, str):
        ref = json.loads((path.parent / ref).read_text(encoding="utf-8"))
    family = FnFamily(seeded_from_json(ref))
    if "n" in data and int(data["n"]) != family.n:
        raise ValueError(f"family file says n={data['n']} but the sampler outputs {family.n} bits")
    return family


# ---------------------------------------------------------------------------
# Inverters
# ---------------------------------------------------------------------------


class PosteriorInverter:
    """Inverter described by an explicit preimage law for every image."""

    family: FnFamily
    slack: Prob

    @property
    def n(self) -> int:
        return self.family.n

    def posterior(self, image: Image) -> Mapping[Preimage, Fraction]:
        raise NotImplementedError

    def invert(self, image: Image, rng: np.random.Generator) -> Preimage:
        law = self.posterior(image)
        preimages = list(law)
        weights = np.array([float(p) for p in law.values()], dtype=np.float64)
        pick = int(np.searchsorted(np.cumsum(weights), rng.random() * weights.sum(), side="right"))
        return preimages[min(pick, len(preimages) - 1)]


@dataclass(eq=False)
class BruteForceInverter(PosteriorInverter):
    """Samples the exact posterior over enumerated preimages."""

    family: FnFamily
    gate: Optional[BudgetGate] = None
    slack: Prob = Fraction(0)

    @cached_property
    def table(self) -> dict[Image, dict[Preimage, Fraction]]:
        raw = self.family.preimage_table(self.gate)
        _LOGGER.debug("inverted %d images of %s", len(raw), self.family.sampler.name)
        return {
            image: {pre: Fraction(1, len(pres)) for pre in pres} for image, pres in raw.items()
        }

    def posterior(self, image: Image) -> Mapping[Preimage, Fraction]:
        try:
            return self.table[image]
        except KeyError:
            raise NoPreimage(f"no input of f maps to {image}") from None


@dataclass(eq=False)
class PlantedInverter(PosteriorInverter):
    """(1−δ)·posterior + δ·point mass on a fixed wrong seed chosen per index."""

    base: BruteForceInverter
    delta: Fraction
    seed: int = 0
    _wrong: dict[int, str] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self) -> None:
        self.delta = Fraction(self.delta)
        if not 0 <= self.delta <= 1:
            raise ValueError("delta must lie in [0, 1]")

    @property
    def family(self) -> FnFamily:
        return self.base.family

    @property
    def slack(self) -> Fraction:
        return self.delta

    def wrong_seed(self, i: int) -> str:
        if i not in self._wrong:
            bits = make_rng(self.seed, i).integers(0, 2, size=self.family.seed_len)
            self._wrong[i] = "".join("1" if b else "0" for b in bits)
        return self._wrong[i]

    def wrong_law(self, image: Image) -> dict[Preimage, Fraction]:
        truth = self.base.posterior(image)
        code = next(iter(truth))[1]
        return {(self.wrong_seed(image[0]), code): Fraction(1)}

    def posterior(self, image: Image) -> Mapping[Preimage, Fraction]:
        truth = self.base.posterior(image)
        law = {pre: (1 - self.delta) * p for pre, p in truth.items()}
        for pre, p in self.wrong_law(image).items():
            law[pre] = law.get(pre, Fraction(0)) + self.delta * p
        return {pre: p for pre, p in law.items() if p}


def brute_force_inverter(family: FnFamily, gate: Optional[BudgetGate] = None) -> BruteForceInverter:
    return BruteForceInverter(family, gate)


# ---------------------------------------------------------------------------
# Classical extrapolator
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class ClassicalExt(TabularExtrapolator):
    """Bit i ≥ 2: invert (i−1, prefix), rerun S on the returned seed, output its bit i.

    Bit 1 comes from a fresh seed. Counting uses the induced conditional table.
    """

    family: FnFamily
    inverter: PosteriorInverter

    @property
    def n(self) -> int:
        return self.family.n

    @property
    def slack(self) -> Prob:
        return self.inverter.slack

    @cached_property
    def _first_bit(self) -> Fraction:
        return self.family.sampler.exact_dist().prefix_masses.get("1", Fraction(0))

    def conditional(self, i: int, prefix: str) -> Fraction:
        if i == 1:
            return self._first_bit
        law = self.inverter.posterior((i - 1, prefix))
        return sum(
            (p for (r, _), p in law.items() if self.family.sampler(r)[i - 1] == "1"), Fraction(0)
        )

    def next_bit(self, i: int, prefix: str, rng: np.random.Generator) -> int:
        if not 1 <= i <= self.n or len(prefix) != i - 1:
            raise ValueError(f"index {i} needs a prefix of {i - 1} bits")
        if i == 1:
            return int(self.family.sampler.sample(rng)[0])
        r, _ = self.inverter.invert((i - 1, prefix), rng)
        return int(self.family.sampler(r)[i - 1])


def classical_ext(family: FnFamily, inverter: PosteriorInverter) -> ClassicalExt:
    return ClassicalExt(family, inverter)


# ---------------------------------------------------------------------------
# SD chain
# ---------------------------------------------------------------------------


def _sd(p: Mapping, q: Mapping) -> Fraction:
    keys = set(p) | set(q)
    return sum((abs(p.get(k, Fraction(0)) - q.get(k, Fraction(0))) for k in keys), Fraction(0)) / 2


def _next_bit_law(family: FnFamily, law: Mapping[Preimage, Fraction], i: int) -> dict[str, Fraction]:
    out: dict[str, Fraction] = defaultdict(Fraction)
    for (r, _), p in law.items():
        out[family.sampler(r)[i] if i else ""] += p
    return dict(out)


@dataclass(frozen=True)
class TriangleStep:
    """Per-index terms of SD(Ext vs Q) ≤ SD(prefixes) + SD(Ext vs S) + SD(S vs Q)."""

    target: tuple[Fraction, ...]
    prefix_shift: tuple[Fraction, ...]
    middle: tuple[Fraction, ...]
    source_gap: tuple[Fraction, ...]
    sampler_sd: Fraction

    @property
    def residuals(self) -> tuple[Fraction, ...]:
        return tuple(
            a + b + c - t
            for t, a, b, c in zip(self.target, self.prefix_shift, self.middle, self.source_gap)
        )

    @property
    def holds(self) -> bool:
        return all(r >= 0 for r in self.residuals)

    @property
    def averaged_target(self) -> Fraction:
        return sum(self.target, Fraction(0)) / len(self.target)


@dataclass(frozen=True)
class SdChainReport:
    n: int
    k: int
    index_bits: int
    inverter_sd: Fraction
    pushforward_sd: Fraction
    per_index_sd: tuple[Fraction, ...]
    triangle: Optional[TriangleStep] = None

    @property
    def averaged_sd(self) -> Fraction:
        return sum(self.per_index_sd, Fraction(0)) / (self.n - 1)

    @property
    def averaging_factor(self) -> Fraction:
        """2^w/(n−1): the averaged SD equals this multiple of the pushforward SD."""

        return Fraction(2**self.index_bits, self.n - 1)

    @property
    def data_processing_holds(self) -> bool:
        return self.pushforward_sd <= self.inverter_sd

    @property
    def averaging_holds(self) -> bool:
        return self.averaged_sd == self.averaging_factor * self.pushforward_sd

    @property
    def averaged_bound_holds(self) -> bool:
        return self.averaged_sd <= self.averaging_factor * self.inverter_sd

    @property
    def target(self) -> Fraction:
        return Fraction(1, self.n**self.k)

    @property
    def inverter_within_target(self) -> bool:
        return self.inverter_sd <= self.target

    @property
    def exact_reproduction(self) -> bool:
        return all(sd == 0 for sd in self.per_index_sd)

    @property
    def holds(self) -> bool:
        checks = [self.data_processing_holds, self.averaging_holds, self.averaged_bound_holds]
        if self.triangle is not None:
            checks.append(self.triangle.holds)
        return all(checks)

    def to_json(self) -> dict:
        data = {
            "n": self.n,
            "k": self.k,
            "index_bits": self.index_bits,
            "inverter_sd": fraction_str(self.inverter_sd),
            "pushforward_sd": fraction_str(self.pushforward_sd),
            "per_index_sd": [fraction_str(v) for v in self.per_index_sd],
            "averaged_sd": fraction_str(self.averaged_sd),
            "holds": self.holds,
        }
        if self.triangle is not None:
            data["triangle_residuals"] = [fraction_str(v) for v in self.triangle.residuals]
        return data


def _ext_conditional(ext: ClassicalExt, i: int, prefix: str) -> Fraction:
    # prefixes S never produces are scored with a fair coin
    try:
        return ext.conditional(i, prefix)
    except NoPreimage:
        return Fraction(1, 2)


def _joint(prefixes: Mapping[str, Fraction], cond) -> dict[str, Fraction]:
    out: dict[str, Fraction] = {}
    for prefix, mass in prefixes.items():
        one = cond(prefix)
        out[prefix + "1"] = mass * one
        out[prefix + "0"] = mass * (1 - one)
    return out


def _triangle(ext: ClassicalExt, s_dist: BitStringDist, quantum: BitStringDist) -> TriangleStep:
    n = s_dist.n
    s_chain, q_chain = chain_factorize(s_dist), chain_factorize(quantum)
    s_pre, q_pre = s_dist.prefix_masses, quantum.prefix_masses
    target, shift, middle, gap = [], [], [], []
    for i in range(1, n):
        s_level = {p: m for p, m in s_pre.items() if len(p) == i}
        q_level = {p: m for p, m in q_pre.items() if len(p) == i}

        def ext_cond(prefix: str, idx: int = i + 1) -> Fraction:
            return _ext_conditional(ext, idx, prefix)

        ext_q = _joint(q_level, ext_cond)
        ext_s = _joint(s_level, ext_cond)
        exact_s = _joint(s_level, s_chain.conditional)
        exact_q = _joint(q_level, q_chain.conditional)
        target.append(_sd(ext_q, exact_q))
        shift.append(_sd(ext_q, ext_s))
        middle.append(_sd(ext_s, exact_s))
        gap.append(_sd(exact_s, exact_q))
    return TriangleStep(
        tuple(target), tuple(shift), tuple(middle), tuple(gap),
        Fraction(statistical_distance(s_dist, quantum)),
    )


def verify_sd_chain(
    family: FnFamily,
    inverter: PosteriorInverter,
    k: int,
    quantum: Optional[BitStringDist] = None,
) -> SdChainReport:
    """Every SD of the inverter-to-extrapolator chain, computed exactly."""

    table = family.preimage_table()
    total = 2**family.input_len
    inverter_sd = pushforward_sd = Fraction(0)
    for image, preimages in table.items():
        weight = Fraction(len(preimages), total)
        truth = {pre: Fraction(1, len(preimages)) for pre in preimages}
        law = inverter.posterior(image)
        inverter_sd += weight * _sd(truth, law)
        i = image[0]
        pushforward_sd += weight * _sd(
            _next_bit_law(family, truth, i), _next_bit_law(family, law, i)
        )

    s_dist = family.sampler.exact_dist()
    chain: ChainFactorization = chain_factorize(s_dist)
    ext = classical_ext(family, inverter)
    per_index = [Fraction(0)] * (family.n - 1)
    for prefix, mass in s_dist.prefix_masses.items():
        if not 1 <= len(prefix) <= family.n - 1:
            continue
        i = len(prefix)
        per_index[i - 1] += mass * abs(ext.conditional(i + 1, prefix) - chain.conditional(prefix))

    triangle = None
    if quantum is not None:
        if quantum.n != family.n:
            raise ValueError("the imitated distribution must have the sampler's output length")
        triangle = _triangle(ext, s_dist, quantum)
    return SdChainReport(
        family.n, k, family.index_bits, inverter_sd, pushforward_sd, tuple(per_index), triangle
    )


def planted_sd(inverter: PlantedInverter) -> Fraction:
    """δ·E_image[SD(posterior, wrong law)], the inverter SD a planted error must produce."""

    family = inverter.family
    total = 2**family.input_len
    expected = Fraction(0)
    for image, preimages in family.preimage_table().items():
        truth = {pre: Fraction(1, len(preimages)) for pre in preimages}
        expected += Fraction(len(preimages), total) * _sd(truth, inverter.wrong_law(image))
    return inverter.delta * expected
