"""Generator-side constructions: padding amplification, mixture instances and the
decider-to-distinguisher algebra."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence, Union

from ..policy import BudgetExceeded
from . import (
    Decider,
    LengthMismatch,
    OracleMiss,
    PreconditionUnmet,
    Prob,
    Sampler,
    all_strings,
    parse_fraction,
)
from .dist import (
    DENSE_CAP,
    AmplificationBound,
    BitStringDist,
    mixture,
    parallel_repeat,
    product,
    product_sd,
    statistical_distance,
    truncate,
)
from .gapk import GapKParams, Label, OracleLabelDecider, label_instance
from .sampler import CircuitSampler, TableSampler, corpus_dist, load_circuit, load_seeded
from .utm import KolmogorovOracle, UtmConfig, count_low_complexity, describe_all

_LOGGER = logging.getLogger(__name__)

HALF = Fraction(1, 2)


def _as_sampler(gen: Union[Sampler, BitStringDist]) -> Sampler:
    return TableSampler(gen) if isinstance(gen, BitStringDist) else gen


def _uniform_like(d: BitStringDist) -> BitStringDist:
    return BitStringDist.uniform(d.n)


@dataclass(frozen=True)
class QprgSpec:
    """A generator together with a verified lower bound on its distance from uniform."""

    gen: Sampler
    claimed_sd: Fraction
    dist: BitStringDist = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "claimed_sd", Fraction(self.claimed_sd))
        dist = self.gen.exact_dist()
        object.__setattr__(self, "dist", dist)
        if self.sd < self.claimed_sd:
            raise PreconditionUnmet(
                f"generator is only {float(self.sd):.6f}-far, claimed {float(self.claimed_sd):.6f}"
            )

    @classmethod
    def of(cls, gen: Union[Sampler, BitStringDist], claimed_sd: Prob = 0) -> "QprgSpec":
        return cls(_as_sampler(gen), Fraction(claimed_sd))

    @property
    def n(self) -> int:
        return self.dist.n

    @property
    def sd(self) -> Fraction:
        return Fraction(statistical_distance(self.dist, _uniform_like(self.dist)))


def _gen_from_json(data: Mapping, base_dir: Path) -> Sampler:
    if "corpus" in data:
        return TableSampler(corpus_dist(data["corpus"], int(data["n"])))
    if "circuit" in data:
        return CircuitSampler(load_circuit(base_dir / data["circuit"]))
    if "seeded" in data:
        return load_seeded(base_dir / data["seeded"])
    raise ValueError(f"cannot resolve generator reference {dict(data)}")


def load_qprg(path: Path) -> QprgSpec:
    """JSON ``{"gen": {...}, "claimed_sd": "p/q"}`` with sampler files relative to ``path``."""

    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    gen = _gen_from_json(data["gen"], path.parent)
    return QprgSpec(gen, Fraction(parse_fraction(data.get("claimed_sd", "0"))))


@dataclass(frozen=True)
class NuQprgSpec:
    """One generator per advice value μ ∈ [n]; ``mu_star`` (1-based) is the good one."""

    gens: tuple[Sampler, ...]
    mu_star: int
    claimed_sd: Fraction
    dists: tuple[BitStringDist, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        dists = tuple(g.exact_dist() for g in self.gens)
        if not dists:
            raise ValueError("need at least one advice value")
        n = dists[0].n
        if any(d.n != n for d in dists):
            raise LengthMismatch("all advice generators must share an output length")
        if len(dists) != n:
            raise LengthMismatch(f"{len(dists)} advice values for output length {n}")
        if not 1 <= self.mu_star <= len(dists):
            raise ValueError("mu_star must index an advice value")
        object.__setattr__(self, "dists", dists)
        object.__setattr__(self, "claimed_sd", Fraction(self.claimed_sd))
        good = Fraction(statistical_distance(dists[self.mu_star - 1], _uniform_like(dists[0])))
        if good < self.claimed_sd:
            raise PreconditionUnmet("the designated advice is not far enough from uniform")

    @classmethod
    def of(
        cls, gens: Sequence[Union[Sampler, BitStringDist]], mu_star: int, claimed_sd: Prob = 0
    ) -> "NuQprgSpec":
        return cls(tuple(_as_sampler(g) for g in gens), mu_star, Fraction(claimed_sd))

    @property
    def n(self) -> int:
        return self.dists[0].n


# ---------------------------------------------------------------------------
# Amplification
# ---------------------------------------------------------------------------


def _ceil_power(n: int, exponent: float) -> tuple[int, float]:
    raw = n**exponent
    return math.ceil(raw - 1e-9), raw


@dataclass(frozen=True)
class AmplifiedQprg:
    """B independent A-bit blocks of the base generator, cut to the first n bits."""

    base: BitStringDist
    copies: int
    n: int
    tau: Optional[float] = None
    raw_block_len: Optional[float] = None
    raw_copies: Optional[float] = None

    def __post_init__(self) -> None:
        if self.copies < 1:
            raise ValueError("need at least one copy")
        if self.n > self.block_len * self.copies:
            raise LengthMismatch("output longer than the concatenated blocks")

    @property
    def block_len(self) -> int:
        return self.base.n

    @property
    def truncated(self) -> bool:
        return self.n < self.block_len * self.copies

    @property
    def full_blocks(self) -> int:
        return self.n // self.block_len

    def _factors(self) -> list[tuple[BitStringDist, BitStringDist]]:
        factors = [(self.base, _uniform_like(self.base))] * self.full_blocks
        remainder = self.n % self.block_len
        if remainder:
            factors.append((truncate(self.base, remainder), BitStringDist.uniform(remainder)))
        return factors

    def exact_dist(self, cap: int = DENSE_CAP) -> BitStringDist:
        if self.n > cap:
            raise BudgetExceeded(f"{self.n}-bit output table exceeds the {cap}-bit cap")
        blocks = parallel_repeat(self.base, self.full_blocks, cap) if self.full_blocks else None
        remainder = self.n % self.block_len
        if remainder:
            tail = truncate(self.base, remainder)
            return product(blocks, tail) if blocks is not None else tail
        return blocks

    def sd_to_uniform(self) -> Fraction:
        return product_sd(self._factors())

    def untruncated_sd(self) -> Fraction:
        return product_sd([(self.base, _uniform_like(self.base))] * self.copies)

    def bound_check(self) -> AmplificationBound:
        """Exact SD against both lower bounds, counting only the complete blocks kept."""

        base_sd = Fraction(statistical_distance(self.base, _uniform_like(self.base)))
        k = self.full_blocks
        return AmplificationBound(
            base_sd=base_sd,
            copies=k,
            exact_sd=self.sd_to_uniform(),
            stated_bound=1.0 - math.exp(-k * float(base_sd)),
            sound_bound=1.0 - math.exp(-k * float(base_sd) ** 2 / 2),
            degenerate=base_sd == 0,
        )


BaseFamily = Union[str, Callable[[int], BitStringDist]]


def amplify(base: BaseFamily, n: int, tau: float, cap: int = DENSE_CAP) -> AmplifiedQprg:
    """Blocks of length A = ⌈n^{(1−τ)/2}⌉, B = ⌈n^{(1+τ)/2}⌉ copies, truncated to n bits."""

    block_len, raw_a = _ceil_power(n, (1 - tau) / 2)
    copies, raw_b = _ceil_power(n, (1 + tau) / 2)
    if block_len * copies > cap:
        raise BudgetExceeded(f"A·B = {block_len * copies} exceeds the {cap}-bit verification cap")
    family = (lambda m: corpus_dist(base, m)) if isinstance(base, str) else base
    _LOGGER.debug("amplify n=%d tau=%s: A=%d (%.4f), B=%d (%.4f)", n, tau, block_len, raw_a, copies, raw_b)
    return AmplifiedQprg(family(block_len), copies, n, tau, raw_a, raw_b)


def amplify_blocks(base: BitStringDist, copies: int, cap: int = DENSE_CAP) -> AmplifiedQprg:
    if base.n * copies > cap:
        raise BudgetExceeded(f"A·B = {base.n * copies} exceeds the {cap}-bit verification cap")
    return AmplifiedQprg(base, copies, base.n * copies)


# ---------------------------------------------------------------------------
# Instance distributions
# ---------------------------------------------------------------------------


def mixture_instance(gen: BitStringDist) -> BitStringDist:
    """½·gen + ½·uniform."""

    return mixture(gen, _uniform_like(gen), HALF)


def nu_mixture_instance(spec: NuQprgSpec) -> BitStringDist:
    """(1/k)·Σ_μ [½·gen(μ) + ½·uniform] over the k advice values."""

    weight = Fraction(1, len(spec.dists))
    table: dict[str, Fraction] = {}
    for d in spec.dists:
        for x, p in mixture_instance(d).items():
            table[x] = table.get(x, Fraction(0)) + weight * p
    return BitStringDist(spec.n, table)


# ---------------------------------------------------------------------------
# Claims about uniform and generator mass
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClaimHighReport:
    n: int
    delta: int
    low_count: int
    cross_check_count: int
    mass: Fraction
    bound: Fraction

    @property
    def holds(self) -> bool:
        return self.mass <= self.bound and self.low_count == self.cross_check_count


def verify_claim_high(oracle: KolmogorovOracle, n: int, delta: int) -> ClaimHighReport:
    """Uniform mass of {x : K_T(x) ≤ n−Δ} against 2^{−Δ+1}."""

    s = n - delta
    if s > oracle.config.max_program_len:
        raise OracleMiss(f"n − Δ = {s} above L_max = {oracle.config.max_program_len}")
    direct = 0
    for x in all_strings(n):
        k = oracle.k_value(x)
        if k is not None and k <= s:
            direct += 1
    via_counts = count_low_complexity(oracle, n, s) if s >= 0 else 0
    return ClaimHighReport(
        n, delta, direct, via_counts, Fraction(direct, 2**n), Fraction(2) ** (1 - delta)
    )


@dataclass(frozen=True)
class PartitionReport:
    """Sizes and masses of A = {Pr < 2^{−n}}, B, C = {Pr ≥ G·2^{−n+n^τ}}."""

    n: int
    tau: float
    g: float
    sd: Fraction
    sizes: tuple[int, int, int]
    masses: tuple[Fraction, Fraction, Fraction]
    slack: float = 1.0

    @property
    def hypothesis(self) -> bool:
        return float(self.sd) >= 1.0 - 2.0 ** -(self.n**self.tau)

    @property
    def count_bound(self) -> float:
        return 2.0 ** (self.n - self.n**self.tau) * self.slack

    @property
    def mass_bound(self) -> float:
        return 1.0 - self.g - 2.0 ** -(self.n**self.tau)

    @property
    def complete(self) -> bool:
        return sum(self.masses, Fraction(0)) == 1

    @property
    def count_holds(self) -> bool:
        return self.sizes[1] + self.sizes[2] <= self.count_bound

    @property
    def mass_holds(self) -> bool:
        return float(self.masses[2]) >= self.mass_bound - 1e-12

    @property
    def heavy_mass_holds(self) -> bool:
        """mass(B ∪ C) ≥ SD(gen, U), exact."""

        return self.masses[1] + self.masses[2] >= self.sd


def _log2(p: Fraction) -> float:
    return math.log2(p.numerator) - math.log2(p.denominator)


def _int_root(value: int, k: int) -> Optional[int]:
    guess = round(value ** (1 / k))
    for root in (guess - 1, guess, guess + 1):
        if root >= 0 and root**k == value:
            return root
    return None


def _exact_power(n: int, exponent: Fraction) -> Optional[Fraction]:
    """n^exponent when it is rational, else None."""

    if exponent.denominator > 64:
        return None
    base = Fraction(n) ** exponent.numerator
    num = _int_root(base.numerator, exponent.denominator)
    den = _int_root(base.denominator, exponent.denominator)
    return None if num is None or den is None else Fraction(num, den)


def _exact_log2(g: Prob) -> Optional[Fraction]:
    """log2 g when g is a power of two, else None."""

    g = Fraction(g)
    num, den = g.numerator, g.denominator
    if g <= 0 or num & (num - 1) or den & (den - 1):
        return None
    return Fraction(num.bit_length() - den.bit_length())


def _cut_exponent(n: int, tau: float, g: Optional[Prob]) -> Optional[Fraction]:
    """log2 G − n + n^τ as a fraction, or None when it is irrational."""

    tau = Fraction(tau)
    lifted = _exact_power(n, tau)
    if g is None:
        shrink = _exact_power(n, 2 * tau - 1)
        log_g = None if shrink is None else -shrink
    else:
        log_g = _exact_log2(g)
    if lifted is None or log_g is None:
        return None
    return log_g - n + lifted


def _at_least_power_of_two(p: Fraction, exponent: Union[Fraction, float]) -> bool:
    """p ≥ 2^exponent; exact on rational exponents, binary64 otherwise."""

    if isinstance(exponent, Fraction):
        return p**exponent.denominator >= Fraction(2) ** exponent.numerator
    return _log2(p) >= exponent


def verify_claim_low(
    gen: BitStringDist, tau: float, g: Optional[float] = None, slack: float = 1.0
) -> PartitionReport:
    """Partition {0,1}^n by generator probability; raises PreconditionUnmet if gen is too close."""

    if not gen.exact:
        raise ValueError("the partition check needs an exact distribution")
    n = gen.n
    eps = 2 * tau - 1
    exact_cut = _cut_exponent(n, tau, g)
    g = 2.0 ** -(n**eps) if g is None else float(g)
    cut = math.log2(g) - n + n**tau if exact_cut is None else exact_cut
    floor = Fraction(1, 2**n)
    sizes = [0, 0, 0]
    masses = [Fraction(0)] * 3
    for x in all_strings(n):
        p = gen.prob(x)
        if p < floor:
            part = 0
        elif _at_least_power_of_two(p, cut):
            part = 2
        else:
            part = 1
        sizes[part] += 1
        masses[part] += p
    sd = Fraction(statistical_distance(gen, _uniform_like(gen)))
    report = PartitionReport(n, tau, g, sd, tuple(sizes), tuple(masses), slack)
    if not report.hypothesis:
        raise PreconditionUnmet(
            f"SD(gen, U) = {float(sd):.6f} below 1 − 2^(−n^τ) = {1 - 2.0 ** -(n**tau):.6f}", report
        )
    return report


def certified_decider(
    gen_name: str, n: int, oracle: KolmogorovOracle, s1: int, cfg: Optional[UtmConfig] = None
) -> OracleLabelDecider:
    """Accept K_T(x) ≤ s1 plus every x with Pr_gen[x] ≥ (99/100)·2^{−n}, each certified by
    a verified index description."""

    cfg = cfg or oracle.config
    return OracleLabelDecider(oracle, s1, describe_all(gen_name, n, (n, 0), cfg))


# ---------------------------------------------------------------------------
# Distinguisher
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Distinguisher:
    """Outputs 1 exactly when the decider says yes."""

    decider: Decider

    def acceptance(self, d: BitStringDist) -> Fraction:
        return sum((p * self.decider.accept_probability(x) for x, p in d.items()), Fraction(0))

    def advantage(self, gen: BitStringDist) -> Fraction:
        return abs(self.acceptance(gen) - self.acceptance(_uniform_like(gen)))


def distinguisher_from_decider(decider: Decider) -> Distinguisher:
    return Distinguisher(decider)


@dataclass(frozen=True)
class DistinguisherReport:
    gen_yes: Fraction
    uniform_yes: Fraction
    total_error: Fraction
    gen_correction: Fraction
    uniform_correction: Fraction
    gen_not_yes: Fraction
    uniform_not_no: Fraction
    low_term: float
    high_term: Fraction

    @property
    def advantage(self) -> Fraction:
        return abs(self.gen_yes - self.uniform_yes)

    @property
    def residual(self) -> Fraction:
        """2·error − (1 − (Pr_gen[yes] − Pr_U[yes]) − corrections); zero by construction."""

        rhs = 1 - (self.gen_yes - self.uniform_yes) - self.gen_correction - self.uniform_correction
        return 2 * self.total_error - rhs

    @property
    def corrections_dominated(self) -> bool:
        return self.gen_correction <= self.gen_not_yes and self.uniform_correction <= self.uniform_not_no

    @property
    def gen_term_holds(self) -> bool:
        return float(self.gen_not_yes) <= self.low_term

    @property
    def uniform_term_holds(self) -> bool:
        return self.uniform_not_no <= self.high_term


def distinguisher_identity(
    decider: Decider, gen: BitStringDist, params: GapKParams, oracle: KolmogorovOracle
) -> DistinguisherReport:
    """Exact terms of the error/advantage identity on the instance law ½·gen + ½·U."""

    n = gen.n
    uniform_p = Fraction(1, 2**n)
    gen_yes = uniform_yes = Fraction(0)
    gen_corr = uniform_corr = Fraction(0)
    gen_not_yes = uniform_not_no = Fraction(0)
    gen_err = uniform_err = Fraction(0)
    for x in all_strings(n):
        label = label_instance(x, params, oracle).label
        accept = decider.accept_probability(x)
        reject = 1 - accept
        p = gen.prob(x)
        gen_yes += p * accept
        uniform_yes += uniform_p * accept
        if label is not Label.YES:
            gen_not_yes += p
            gen_corr += p * reject
        if label is not Label.NO:
            uniform_not_no += uniform_p
            uniform_corr += uniform_p * accept
        if label is Label.NO:
            gen_corr -= p * accept
            gen_err += p * accept
            uniform_err += uniform_p * accept
        if label is Label.YES:
            uniform_corr -= uniform_p * reject
            gen_err += p * reject
            uniform_err += uniform_p * reject
    return DistinguisherReport(
        gen_yes=gen_yes,
        uniform_yes=uniform_yes,
        total_error=(gen_err + uniform_err) / 2,
        gen_correction=gen_corr,
        uniform_correction=uniform_corr,
        gen_not_yes=gen_not_yes,
        uniform_not_no=uniform_not_no,
        low_term=2 * 2.0 ** -(n ** float(params.eps)),
        high_term=Fraction(2) ** (1 - params.gap),
    )


@dataclass(frozen=True)
class NuAdvantageReport:
    per_advice: tuple[Fraction, ...]
    mu_star: int

    @property
    def averaged(self) -> Fraction:
        """Signed advantage of the advice-averaged generator."""

        return sum(self.per_advice, Fraction(0)) / len(self.per_advice)

    @property
    def good_advice(self) -> Fraction:
        return self.per_advice[self.mu_star - 1]


def nu_advantage(decider: Decider, spec: NuQprgSpec) -> NuAdvantageReport:
    distinguisher = Distinguisher(decider)
    baseline = distinguisher.acceptance(BitStringDist.uniform(spec.n))
    per_advice = tuple(distinguisher.acceptance(d) - baseline for d in spec.dists)
    return NuAdvantageReport(per_advice, spec.mu_star)
