"""Experiment catalogue E1..E6: per-n cell functions, defaults and the claim registry."""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .agents import ConfigInvalid, IntegrityLog, ReportRow
from .config import SETTINGS
from .kernels import PreconditionUnmet, Prob, fraction_str, parse_fraction
from .kernels.classical import (
    FnFamily,
    PlantedInverter,
    brute_force_inverter,
    planted_sd,
    verify_sd_chain,
)
from .kernels.dist import amplification_bounds, conditional_mass_bound, statistical_distance
from .kernels.extrapolate import (
    EstimateConfig,
    estimate,
    estimate_accuracy,
    exact_extrapolator,
    exact_substitution,
    hoeffding_trials,
    noisy_extrapolator,
    verify_claim_invert_is_high,
)
from .kernels.gapk import (
    CoinDecider,
    GapKParams,
    Label,
    PerfectDecider,
    ThresholdDecider,
    band_report,
    default_gap,
    exact_error_account,
    high_size_cap,
    label_instance,
    verify_high_descriptions,
    yes_error_within,
)
from .kernels.qprg import (
    Distinguisher,
    NuQprgSpec,
    amplify,
    amplify_blocks,
    certified_decider,
    distinguisher_identity,
    mixture_instance,
    nu_advantage,
    nu_mixture_instance,
    verify_claim_high,
    verify_claim_low,
)
from .kernels.sampler import builtin_sampler, corpus_dist, corpus_names
from .kernels.utm import (
    HEADER_BITS,
    IDX_MAX_N,
    KolmogorovOracle,
    UtmConfig,
    count_low_complexity,
)
from .policy import BudgetGate

FLOAT_TOL = 1e-9

# Claim anchor -> experiment -> checks reporting on it.
CLAIMS: dict[str, dict[str, tuple[str, ...]]] = {
    "program-counting": {"E3": ("program_count", "level_count")},
    "low-complexity-count": {"E3": ("low_count",), "E2": ("low_set_count",)},
    "uniform-high-complexity": {"E3": ("claim_high", "claim_high_cross_check")},
    "conditional-mass": {"E1": ("conditional_mass",)},
    "chain-rule-identity": {"E1": ("chain_identity",)},
    "estimate-accuracy": {"E1": ("estimate_accuracy", "estimate_schema")},
    "inverter-is-high": {"E1": ("invert_is_high",)},
    "count-deviation": {"E1": ("hoeffding",)},
    "decider-band": {"E2": ("band_outside", "high_size")},
    "decider-yes-error": {"E2": ("yes_mass", "yes_error")},
    "high-descriptions": {"E2": ("high_descriptions",)},
    "generator-low-partition": {
        "E4": ("low_hypothesis", "low_partition", "low_count", "low_mass", "low_heavy_mass")
    },
    "distinguisher-identity": {"E4": ("identity_residual", "identity_corrections")},
    "distinguisher-advantage": {"E4": ("certified_advantage",)},
    "nonuniform-advantage": {"E4": ("nu_average", "nu_mixture")},
    "inverter-posterior": {"E5": ("inverter_exact", "planted_inverter")},
    "classical-extrapolation": {"E5": ("exact_reproduction",)},
    "extrapolation-sd-chain": {
        "E5": ("data_processing", "averaging", "averaged_bound", "planted_bound", "triangle")
    },
    "padding-amplification": {
        "E6": ("amplification_sound", "amplification_stated", "truncation", "repetition")
    },
}

CHECK_CLAIMS: dict[tuple[str, str], str] = {
    (experiment, check): claim
    for claim, per_experiment in CLAIMS.items()
    for experiment, checks in per_experiment.items()
    for check in checks
}


def experiment_checks(experiment: str) -> set[str]:
    return {check for (exp, check) in CHECK_CLAIMS if exp == experiment}


def claims_for(experiment: str) -> tuple[str, ...]:
    return tuple(sorted({claim for (exp, _), claim in CHECK_CLAIMS.items() if exp == experiment}))


def cell_seed(seed: int, *stream: int) -> int:
    """Independent 63-bit seed for the substream ``stream`` of ``seed``."""

    state = np.random.SeedSequence(seed, spawn_key=tuple(stream)).generate_state(2, np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


# ---------------------------------------------------------------------------
# Cell context
# ---------------------------------------------------------------------------


@dataclass
class CellContext:
    experiment: str
    n: int
    index: int
    seed: int
    params: Mapping[str, Any]
    oracle_provider: Callable[[], KolmogorovOracle] = field(repr=False)
    gate: BudgetGate = field(default_factory=BudgetGate)
    audit: Optional[IntegrityLog] = field(default=None, repr=False)

    def oracle(self) -> KolmogorovOracle:
        return self.oracle_provider()

    def param(self, key: str) -> Any:
        return self.params[key]

    def row(
        self,
        check: str,
        measured: Prob,
        bound: Optional[Prob],
        passed: bool,
        note: Optional[str] = None,
        advisory: bool = False,
        **params: Any,
    ) -> ReportRow:
        try:
            claim = CHECK_CLAIMS[(self.experiment, check)]
        except KeyError:
            raise KeyError(f"{self.experiment} has no registered check {check!r}") from None
        return ReportRow(
            self.experiment, self.n, check, claim, measured, bound, bool(passed), params, note, advisory
        )


# ---------------------------------------------------------------------------
# E1: chain-rule estimation
# ---------------------------------------------------------------------------


def _most_likely(d) -> str:
    best, best_p = None, None
    for y, p in d.items():
        if best_p is None or p > best_p:
            best, best_p = y, p
    return best


def run_e1(ctx: CellContext) -> list[ReportRow]:
    n = ctx.n
    rows = []
    names = ctx.param("corpus") or corpus_names(n)
    for name in names:
        d = corpus_dist(name, n)
        ext = exact_extrapolator(d)
        mismatches = sum(1 for y, p in d.items() if exact_substitution(y, ext) != p)
        rows.append(ctx.row("chain_identity", mismatches, 0, mismatches == 0, dist=name))
        for a in ctx.param("a_values"):
            violating = conditional_mass_bound(d, a)
            bound = Fraction(n) / Fraction(a)
            rows.append(
                ctx.row("conditional_mass", violating, bound, violating <= bound, dist=name, a=a)
            )
        noisy = noisy_extrapolator(d, ctx.param("noise"), "random", ctx.seed)
        for b in ctx.param("b_values"):
            report = verify_claim_invert_is_high(d, noisy, b)
            rows.append(
                ctx.row(
                    "invert_is_high",
                    report.violating_mass,
                    report.markov_bound,
                    report.holds,
                    dist=name,
                    b=b,
                    eps=ctx.param("noise"),
                )
            )

    cfg = EstimateConfig.for_length(n, ctx.param("q"), ctx.param("reps"), ctx.param("c"))
    for j, name in enumerate(ctx.param("accuracy")):
        d = corpus_dist(name, n)
        report = estimate_accuracy(d, exact_extrapolator(d), cfg, cell_seed(ctx.seed, j))
        if ctx.audit is not None:
            for result in report.results:
                for record in result.audit_records():
                    ctx.audit.record("estimate", experiment=ctx.experiment, dist=name, **record)
        floor = ctx.param("min_pass_mass")
        rows.append(
            ctx.row(
                "estimate_accuracy",
                report.weighted_pass_mass,
                floor,
                report.weighted_pass_mass >= floor,
                dist=name,
                reps=cfg.reps,
                c=cfg.c,
            )
        )
        rows.append(
            ctx.row(
                "estimate_schema",
                report.weighted_pass_mass,
                report.schema_bound,
                float(report.weighted_pass_mass) >= report.schema_bound,
                dist=name,
                q=cfg.q,
                hoeffding_bound=report.hoeffding_bound,
            )
        )
        deviation_cfg = replace(
            EstimateConfig.for_length(n, reps=ctx.param("hoeffding_reps")),
            d=Fraction(ctx.param("hoeffding_d")),
        )
        trial = hoeffding_trials(
            exact_extrapolator(d),
            _most_likely(d),
            deviation_cfg,
            ctx.param("hoeffding_trials"),
            cell_seed(ctx.seed, j, 1),
        )
        rows.append(
            ctx.row(
                "hoeffding",
                trial.rate,
                trial.bound,
                trial.rate <= trial.bound,
                dist=name,
                reps=ctx.param("hoeffding_reps"),
                d=ctx.param("hoeffding_d"),
                trials=trial.trials,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# E2: GapK threshold decider
# ---------------------------------------------------------------------------


def _estimator(ctx: CellContext, d, stream: int) -> Callable[[str], Prob]:
    if ctx.param("estimator") == "exact":
        return d.prob
    ext = exact_extrapolator(d)
    cfg = EstimateConfig.for_length(ctx.n, reps=ctx.param("reps"))
    seed = cell_seed(ctx.seed, stream)
    cache: dict[str, Fraction] = {}

    def estimated(x: str) -> Fraction:
        if x not in cache:
            cache[x] = estimate(x, ext, cfg, seed, (int(x, 2),)).product
        return cache[x]

    return estimated


def _gap(value: Any, n: int) -> int:
    if value == "default":
        return default_gap(n)
    if not isinstance(value, int):
        raise ConfigInvalid(f"deltas hold integers or \"default\", got {value!r}")
    return value


def _yes_thresholds(ctx: CellContext, oracle: KolmogorovOracle) -> dict[str, int]:
    """s1 per rule, read off the measured K_T values of every n-bit string."""

    n = ctx.n
    if not oracle.covers("0" * n):
        raise ConfigInvalid(
            f"E2 at n={n} needs every n-bit string in the oracle (L_max >= {n + HEADER_BITS})"
        )
    ks = [k for _, k in oracle.strings(n)]
    measured = {"k_min": min(ks), "k_max": max(ks)}
    try:
        return {rule: measured[rule] for rule in ctx.param("s1_rules")}
    except KeyError as exc:
        raise ConfigInvalid(f"unknown s1 rule {exc.args[0]!r}; use k_min or k_max") from None


def run_e2(ctx: CellContext) -> list[ReportRow]:
    n = ctx.n
    oracle = ctx.oracle()
    thresholds = _yes_thresholds(ctx, oracle)
    rows = []
    for j, name in enumerate(ctx.param("corpus")):
        q = corpus_dist(name, n)
        estimator = _estimator(ctx, q, j)
        for rule, s1 in thresholds.items():
            for delta in sorted({_gap(value, n) for value in ctx.param("deltas")}):
                s = s1 + delta
                params = GapKParams.around(n, s, delta)
                decider = ThresholdDecider(estimator, s, delta)
                band = band_report(decider, q, params, oracle, s, delta)
                account = exact_error_account(decider, q, params, oracle)
                yes = [x for x in q.support() if label_instance(x, params, oracle).label is Label.YES]
                yes_mass = sum((q.prob(x) for x in yes), Fraction(0))
                tags = {"dist": name, "s1_rule": rule, "s": s, "delta": delta}
                rows.append(ctx.row("yes_mass", yes_mass, 0, yes_mass > 0, **tags))
                rows.append(
                    ctx.row("band_outside", len(band.outside), 0, not band.outside, **tags)
                )
                rows.append(
                    ctx.row(
                        "yes_error",
                        account.yes_error_mass,
                        2.0 ** (-delta / 3),
                        yes_error_within(account.yes_error_mass, delta),
                        no_error=account.no_error_mass,
                        **tags,
                    )
                )
                rows.append(
                    ctx.row(
                        "high_size",
                        band.high_size,
                        high_size_cap(s, delta),
                        band.high_size_holds,
                        **tags,
                    )
                )
                rows.append(
                    ctx.row(
                        "low_set_count",
                        len(band.low),
                        band.low_count_bound,
                        len(band.low) <= band.low_count_bound,
                        low_mass=band.low_mass,
                        **tags,
                    )
                )
                if name in oracle.config.library and n <= IDX_MAX_N:
                    high = verify_high_descriptions(
                        name, n, s, delta, oracle.config, oracle, decider
                    )
                    rows.append(
                        ctx.row(
                            "high_descriptions",
                            high.no_error_mass,
                            0,
                            high.holds,
                            members=high.high_size,
                            overhead=high.overhead,
                            index_bits=high.index_bits,
                            index_width_bound=high.index_width_bound,
                            folded_threshold=high.folded_threshold,
                            uncovered_mass=high.uncovered_mass,
                            **tags,
                        )
                    )
    return rows


# ---------------------------------------------------------------------------
# E3: counting bounds
# ---------------------------------------------------------------------------


def run_e3(ctx: CellContext) -> list[ReportRow]:
    n = ctx.n
    oracle = ctx.oracle()
    l_max = oracle.config.max_program_len
    rows = []
    total = sum(oracle.level_counts().values())
    rows.append(
        ctx.row("program_count", total, 2 ** (l_max + 1) - 2, total <= 2 ** (l_max + 1) - 2, l_max=l_max)
    )
    for s in range(0, l_max + 1):
        count = count_low_complexity(oracle, n, s)
        rows.append(ctx.row("level_count", count, 2 ** (s + 1) - 2, count <= 2 ** (s + 1) - 2, s=s))
    for delta in ctx.param("deltas"):
        if n - delta > l_max:
            raise ConfigInvalid(f"n − Δ = {n - delta} needs an oracle with L_max ≥ {n - delta}")
        report = verify_claim_high(oracle, n, delta)
        rows.append(ctx.row("claim_high", report.mass, report.bound, report.mass <= report.bound, delta=delta))
        rows.append(
            ctx.row(
                "claim_high_cross_check",
                report.low_count,
                report.cross_check_count,
                report.low_count == report.cross_check_count,
                delta=delta,
            )
        )
        bound = 2 ** (n - delta + 1) if n - delta + 1 >= 0 else 0
        rows.append(
            ctx.row("low_count", report.low_count, bound, report.low_count <= bound, delta=delta)
        )
    return rows


# ---------------------------------------------------------------------------
# E4: generator hardness
# ---------------------------------------------------------------------------


def run_e4(ctx: CellContext) -> list[ReportRow]:
    n = ctx.n
    oracle = ctx.oracle()
    tau = float(ctx.param("tau"))
    delta = ctx.param("delta")
    s = n + ctx.param("s_offset")
    params = GapKParams.around(n, s, delta)
    rows = []
    for name in ctx.param("gens"):
        gen = corpus_dist(name, n)
        tags = {"gen": name, "tau": ctx.param("tau")}
        try:
            low = verify_claim_low(gen, tau)
        except PreconditionUnmet as exc:
            partial = exc.report
            rows.append(
                ctx.row(
                    "low_hypothesis",
                    partial.sd,
                    1 - 2.0 ** -(n**tau),
                    False,
                    note="generator too close to uniform",
                    **tags,
                )
            )
            continue
        rows.append(ctx.row("low_hypothesis", low.sd, 1 - 2.0 ** -(n**tau), True, **tags))
        rows.append(
            ctx.row("low_partition", sum(low.masses, Fraction(0)), 1, low.complete, **tags)
        )
        rows.append(
            ctx.row(
                "low_count",
                low.sizes[1] + low.sizes[2],
                low.count_bound,
                low.count_holds,
                size_a=low.sizes[0],
                size_b=low.sizes[1],
                size_c=low.sizes[2],
                **tags,
            )
        )
        rows.append(ctx.row("low_mass", low.masses[2], low.mass_bound, low.mass_holds, **tags))
        rows.append(
            ctx.row(
                "low_heavy_mass", low.masses[1] + low.masses[2], low.sd, low.heavy_mass_holds, **tags
            )
        )

        q = mixture_instance(gen)
        deciders = {
            "threshold": ThresholdDecider(q.prob, s, delta),
            "perfect": PerfectDecider(params, oracle),
            "coin": CoinDecider(),
        }
        certified = None
        if name in oracle.config.library and n <= IDX_MAX_N:
            certified = certified_decider(name, n, oracle, params.s1)
            deciders["certified"] = certified
        for label, decider in deciders.items():
            identity = distinguisher_identity(decider, gen, params, oracle)
            rows.append(
                ctx.row(
                    "identity_residual",
                    identity.residual,
                    0,
                    identity.residual == 0,
                    decider=label,
                    advantage=identity.advantage,
                    **tags,
                )
            )
            rows.append(
                ctx.row(
                    "identity_corrections",
                    identity.gen_correction + identity.uniform_correction,
                    identity.gen_not_yes + identity.uniform_not_no,
                    identity.corrections_dominated,
                    decider=label,
                    **tags,
                )
            )

        good = certified or deciders["threshold"]
        if certified is not None:
            distinguisher = Distinguisher(certified)
            advantage = distinguisher.advantage(gen)
            uniform_accept = distinguisher.acceptance(corpus_dist("uniform", n))
            bound = 1 - 2.0 ** -(n**tau) - float(uniform_accept)
            rows.append(
                ctx.row(
                    "certified_advantage",
                    advantage,
                    bound,
                    float(advantage) >= bound - FLOAT_TOL,
                    uniform_accept=uniform_accept,
                    certificate_length=certified.certificate_length,
                    **tags,
                )
            )
        mu_star = ctx.param("mu_star")
        uniform = corpus_dist("uniform", n)
        spec = NuQprgSpec.of([gen if mu == mu_star else uniform for mu in range(1, n + 1)], mu_star)
        nu = nu_advantage(good, spec)
        expected = nu.good_advice / n
        rows.append(
            ctx.row("nu_average", nu.averaged, expected, nu.averaged == expected, mu_star=mu_star, **tags)
        )
        mixed = Fraction(statistical_distance(nu_mixture_instance(spec), uniform))
        diluted = low.sd / (2 * n)
        rows.append(
            ctx.row(
                "nu_mixture",
                mixed,
                diluted,
                mixed == diluted,
                note="good advice carries weight 1/(2n) of the instance law",
                mu_star=mu_star,
                **tags,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# E5: classical extrapolation chain
# ---------------------------------------------------------------------------


def run_e5(ctx: CellContext) -> list[ReportRow]:
    n = ctx.n
    delta = ctx.param("delta")
    k = ctx.param("k")
    quantum = corpus_dist(ctx.param("quantum"), n) if ctx.param("quantum") else None
    rows = []
    for j, name in enumerate(ctx.param("samplers")):
        sampler = builtin_sampler(name, n)
        if sampler.seed_len > ctx.param("max_seed_len"):
            raise ConfigInvalid(
                f"{name} at n={n} needs {sampler.seed_len} seed bits, above max_seed_len"
            )
        family = FnFamily(sampler)
        tags = {"sampler": name, "seed_len": sampler.seed_len}
        brute = brute_force_inverter(family, ctx.gate)
        exact = verify_sd_chain(family, brute, k)
        rows.append(ctx.row("inverter_exact", exact.inverter_sd, 0, exact.inverter_sd == 0, **tags))
        worst = max(exact.per_index_sd, default=Fraction(0))
        rows.append(ctx.row("exact_reproduction", worst, 0, exact.exact_reproduction, **tags))

        planted = PlantedInverter(brute, delta, cell_seed(ctx.seed, j))
        chain = verify_sd_chain(family, planted, k, quantum)
        expected = planted_sd(planted)
        tags["delta"] = delta
        rows.append(
            ctx.row("planted_inverter", chain.inverter_sd, expected, chain.inverter_sd == expected, **tags)
        )
        rows.append(
            ctx.row(
                "data_processing",
                chain.pushforward_sd,
                chain.inverter_sd,
                chain.data_processing_holds,
                **tags,
            )
        )
        rows.append(
            ctx.row(
                "averaging",
                chain.averaged_sd,
                chain.averaging_factor * chain.pushforward_sd,
                chain.averaging_holds,
                **tags,
            )
        )
        rows.append(
            ctx.row(
                "averaged_bound",
                chain.averaged_sd,
                chain.averaging_factor * chain.inverter_sd,
                chain.averaged_bound_holds,
                **tags,
            )
        )
        rows.append(
            ctx.row(
                "planted_bound",
                chain.averaged_sd,
                (n - 1) * Fraction(delta),
                chain.averaged_sd <= (n - 1) * Fraction(delta),
                k=k,
                target=chain.target,
                **tags,
            )
        )
        if chain.triangle is not None:
            slack = min(chain.triangle.residuals, default=Fraction(0))
            rows.append(
                ctx.row(
                    "triangle",
                    slack,
                    0,
                    chain.triangle.holds,
                    quantum=ctx.param("quantum"),
                    sampler_sd=chain.triangle.sampler_sd,
                    averaged_target=chain.triangle.averaged_target,
                    **tags,
                )
            )
    return rows


# ---------------------------------------------------------------------------
# E6: padding amplification
# ---------------------------------------------------------------------------


def _bound_rows(ctx: CellContext, bound, tags: dict) -> list[ReportRow]:
    note = "degenerate" if bound.degenerate else None
    return [
        ctx.row(
            "amplification_sound",
            bound.exact_sd,
            bound.sound_bound,
            bound.sound_holds,
            note=note,
            copies=bound.copies,
            base_sd=bound.base_sd,
            **tags,
        ),
        ctx.row(
            "amplification_stated",
            bound.exact_sd,
            bound.stated_bound,
            bound.stated_holds,
            note=note,
            advisory=True,
            copies=bound.copies,
            **tags,
        ),
    ]


def run_e6(ctx: CellContext) -> list[ReportRow]:
    n = ctx.n
    tau = float(ctx.param("tau"))
    block_len = ctx.param("block_len")
    below = max((m for m in ctx.param("grid") if m < n), default=0)
    rows = []
    for name in ctx.param("bases"):
        amp = amplify(name, n, tau, SETTINGS.exact_cap)
        tags = {
            "base": name,
            "block_len": amp.block_len,
            "raw_block_len": amp.raw_block_len,
            "raw_copies": amp.raw_copies,
            "tau": ctx.param("tau"),
        }
        rows += _bound_rows(ctx, amp.bound_check(), tags)
        truncated_sd, full_sd = amp.sd_to_uniform(), amp.untruncated_sd()
        rows.append(
            ctx.row(
                "truncation",
                truncated_sd,
                full_sd,
                truncated_sd <= full_sd,
                truncated=amp.truncated,
                copies=amp.copies,
                **{key: tags[key] for key in ("base", "block_len")},
            )
        )
        base = corpus_dist(name, block_len)
        for copies in ctx.param("copies"):
            if not below < block_len * copies <= n:
                continue
            blocks = amplify_blocks(base, copies, SETTINGS.exact_cap)
            bound = amplification_bounds(base, copies)
            rows.append(
                ctx.row(
                    "repetition",
                    blocks.sd_to_uniform(),
                    bound.exact_sd,
                    blocks.sd_to_uniform() == bound.exact_sd,
                    base=name,
                    block_len=block_len,
                    copies=copies,
                )
            )
            rows += _bound_rows(ctx, bound, {"base": name, "block_len": block_len, "sweep": True})
    return rows


# ---------------------------------------------------------------------------
# Catalogue
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Experiment:
    name: str
    title: str
    run: Callable[[CellContext], list[ReportRow]]
    default_grid: tuple[int, ...]
    max_n: int
    defaults: Mapping[str, Any]
    needs_oracle: bool = False


EXPERIMENTS: dict[str, Experiment] = {
    "E1": Experiment(
        "E1",
        "chain-rule estimation from extrapolators",
        run_e1,
        (8, 10),
        12,
        {
            "corpus": [],
            "accuracy": ["sticky"],
            "reps": 100_000,
            "c": Fraction(11, 10),
            "q": 1,
            "min_pass_mass": Fraction(99, 100),
            "a_values": [4, 16, 64],
            "b_values": [2, 4, 8],
            "noise": Fraction(1, 64),
            "hoeffding_reps": 10_000,
            "hoeffding_d": 50,
            "hoeffding_trials": 200,
        },
    ),
    "E2": Experiment(
        "E2",
        "GapK threshold decider error",
        run_e2,
        (8, 10, 12),
        IDX_MAX_N,
        {
            "corpus": ["sticky", "bernoulli"],
            "deltas": [3, 6, "default"],
            "s1_rules": ["k_min", "k_max"],
            "estimator": "exact",
            "reps": 10_000,
        },
        needs_oracle=True,
    ),
    "E3": Experiment(
        "E3",
        "counting bounds on the reference machine",
        run_e3,
        (8, 10, 12),
        16,
        {"deltas": [3, 4, 6]},
        needs_oracle=True,
    ),
    "E4": Experiment(
        "E4",
        "generator hardness and distinguisher algebra",
        run_e4,
        (8, 10, 12),
        IDX_MAX_N,
        {"gens": ["sparse"], "tau": Fraction(3, 4), "delta": 3, "s_offset": 3, "mu_star": 1},
        needs_oracle=True,
    ),
    "E5": Experiment(
        "E5",
        "classical extrapolation through an inverter",
        run_e5,
        (4, 5, 6),
        10,
        {
            "samplers": ["parity_prefix", "block_or", "sticky"],
            "delta": Fraction(1, 8),
            "k": 2,
            "quantum": "circuit",
            "max_seed_len": 12,
        },
    ),
    "E6": Experiment(
        "E6",
        "padding amplification",
        run_e6,
        (8, 12, 16),
        24,
        {
            "bases": ["bernoulli", "sticky", "skewed", "low_weight", "circuit", "uniform"],
            "tau": Fraction(1, 2),
            "block_len": 2,
            "copies": [1, 2, 4, 6, 8],
        },
    ),
}


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


def _coerce(value: Any) -> Any:
    if isinstance(value, list):
        return [_coerce(item) for item in value]
    if isinstance(value, str) and "/" in value:
        try:
            return parse_fraction(value)
        except (ValueError, ZeroDivisionError):
            return value
    return value


def _canonical(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(key): _canonical(item) for key, item in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_canonical(item) for item in value]
    if isinstance(value, Path):
        return value.as_posix()
    if isinstance(value, (Fraction, float)) and not isinstance(value, bool):
        return fraction_str(value)
    return value


ORACLE_KEYS = {"path", "step_cap", "max_program_len", "max_output_len", "library"}
TOP_LEVEL_KEYS = {"experiment", "n_grid", "seed", "params", "oracle", "output_dir"}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n_grid: tuple[int, ...] = ()
    seed: int = 0
    overrides: Mapping[str, Any] = field(default_factory=dict)
    oracle: Mapping[str, Any] = field(default_factory=dict)
    output_dir: Path = SETTINGS.output_dir

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"experiment must be one of {sorted(EXPERIMENTS)}, got {self.experiment!r}")
        spec = EXPERIMENTS[self.experiment]
        grid = tuple(self.n_grid) or spec.default_grid
        if any(not isinstance(n, int) or n < 2 or n > spec.max_n for n in grid):
            raise ConfigInvalid(f"n_grid for {self.experiment} must hold integers in [2, {spec.max_n}]")
        object.__setattr__(self, "n_grid", tuple(sorted(set(grid))))
        if not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise ConfigInvalid("seed must be an unsigned 64-bit integer")
        unknown = set(self.overrides) - set(spec.defaults)
        if unknown:
            raise ConfigInvalid(f"unknown params for {self.experiment}: {sorted(unknown)}")
        unknown = set(self.oracle) - ORACLE_KEYS
        if unknown:
            raise ConfigInvalid(f"unknown oracle keys: {sorted(unknown)}")
        if "path" in self.oracle and not Path(self.oracle["path"]).exists():
            raise ConfigInvalid(f"oracle file {self.oracle['path']} does not exist")

    @classmethod
    def load(cls, path: Path, **changes: Any) -> "ExperimentConfig":
        """Read a TOML config; relative paths resolve against the file's directory."""

        path = Path(path)
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigInvalid(f"config file {path} does not exist") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigInvalid(f"{path}: {exc}") from exc
        return cls.from_mapping(data, base_dir=path.parent, **changes)

    @classmethod
    def from_mapping(
        cls, data: Mapping[str, Any], base_dir: Optional[Path] = None, **changes: Any
    ) -> "ExperimentConfig":
        unknown = set(data) - TOP_LEVEL_KEYS
        if unknown:
            raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
        merged = {**data, **{key: value for key, value in changes.items() if value is not None}}
        if "experiment" not in merged:
            raise ConfigInvalid("config is missing 'experiment'")
        oracle = dict(merged.get("oracle", {}))
        if "path" in oracle and base_dir is not None:
            oracle["path"] = str(base_dir / oracle["path"])
        output_dir = Path(merged.get("output_dir", SETTINGS.output_dir))
        if base_dir is not None and "output_dir" in data and changes.get("output_dir") is None:
            output_dir = base_dir / output_dir
        return cls(
            experiment=str(merged["experiment"]),
            n_grid=tuple(merged.get("n_grid", ())),
            seed=merged.get("seed", 0),
            overrides={key: _coerce(value) for key, value in merged.get("params", {}).items()},
            oracle=oracle,
            output_dir=output_dir,
        )

    @property
    def spec(self) -> Experiment:
        return EXPERIMENTS[self.experiment]

    @property
    def params(self) -> dict[str, Any]:
        return {**self.spec.defaults, **self.overrides, "grid": list(self.n_grid)}

    def oracle_config(self) -> UtmConfig:
        """Machine for this run: explicit oracle keys, else L_max = max(n_grid) + 3 capped at 16."""

        fields = {key: value for key, value in self.oracle.items() if key != "path"}
        fields.setdefault("max_program_len", min(max(self.n_grid) + 3, 16))
        if "library" in fields:
            fields["library"] = tuple(fields["library"])
        try:
            return UtmConfig(**fields)
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"invalid oracle settings: {exc}") from exc

    def config_hash(self) -> str:
        payload = {
            "experiment": self.experiment,
            "n_grid": list(self.n_grid),
            "seed": self.seed,
            "params": _canonical(self.params),
            "oracle": _canonical({k: v for k, v in self.oracle.items() if k != "path"}),
        }
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def load_machine_config(path: Path) -> tuple[UtmConfig, Path]:
    """``[oracle]`` table plus ``out`` for ``mclab oracle build``."""

    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigInvalid(f"config file {path} does not exist") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    fields = dict(data.get("oracle", {}))
    fields.pop("path", None)
    if "library" in fields:
        fields["library"] = tuple(fields["library"])
    try:
        cfg = UtmConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"invalid oracle settings: {exc}") from exc
    out = path.parent / data.get("out", "oracle.kto")
    return cfg, out
