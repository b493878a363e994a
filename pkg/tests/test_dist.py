from fractions import Fraction
from pathlib import Path
import sys

import pytest
from hypothesis import given, settings, strategies as st

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mclab.kernels import LengthMismatch, all_strings
from mclab.kernels.dist import (
    BitStringDist,
    amplification_bounds,
    chain_factorize,
    conditional_mass_bound,
    default_mode,
    dump_dist,
    load_dist,
    marginal,
    mixture,
    parallel_repeat,
    parallel_repeat_sd,
    product,
    product_sd,
    statistical_distance,
    truncate,
)
from mclab.policy import BudgetExceeded


def dists(n: int = 3):
    weights = st.lists(st.integers(min_value=0, max_value=20), min_size=2**n, max_size=2**n)
    return weights.filter(lambda w: sum(w) > 0).map(
        lambda w: BitStringDist.from_weights(n, dict(zip(all_strings(n), w)))
    )


def test_constructor_rejects_bad_mass():
    with pytest.raises(ValueError):
        BitStringDist(2, {"00": Fraction(1, 2)})
    with pytest.raises(LengthMismatch):
        BitStringDist(2, {"000": Fraction(1)})
    assert BitStringDist(2, {"00": 0.5, "11": 0.5}, mode="float").total_mass() == 1.0


def test_arithmetic_switches_to_floats_past_sixteen_bits():
    assert default_mode(16) == "exact"
    assert default_mode(17) == "float"
    assert BitStringDist.uniform(16).exact
    wide = BitStringDist.uniform(17)
    assert not wide.exact
    assert wide.prob("0" * 17) == 2.0**-17
    assert BitStringDist.bernoulli_product(17, Fraction(1, 2)).mode == "float"
    assert BitStringDist.uniform(17, mode="exact").prob("1" * 17) == Fraction(1, 2**17)


@settings(max_examples=50, deadline=None)
@given(dists(), dists(), dists())
def test_statistical_distance_is_a_metric(d, e, f):
    assert statistical_distance(d, d) == 0
    assert statistical_distance(d, e) == statistical_distance(e, d)
    assert 0 <= statistical_distance(d, e) <= 1
    assert statistical_distance(d, f) <= statistical_distance(d, e) + statistical_distance(e, f)


@settings(max_examples=30, deadline=None)
@given(dists(2), dists(2))
def test_product_sd_matches_dense_tables(d, e):
    dense = statistical_distance(product(d, product(d, d)), product(e, product(e, e)))
    assert product_sd([(d, e)] * 3) == dense


@settings(max_examples=30, deadline=None)
@given(dists(3))
def test_chain_factorization_reproduces_probabilities(d):
    chain = chain_factorize(d)
    for y in all_strings(3):
        assert chain.probability(y) == d.prob(y)


def test_marginal_and_truncate_agree():
    d = BitStringDist.bernoulli_product(3, Fraction(3, 4))
    assert marginal(d, "1") == Fraction(3, 4)
    assert truncate(d, 2).prob("11") == Fraction(9, 16)
    assert marginal(d, "") == 1


def test_mixture_weights():
    u = BitStringDist.uniform(2)
    z = BitStringDist.point_mass("00")
    half = mixture(z, u, Fraction(1, 2))
    assert half.prob("00") == Fraction(5, 8)
    assert statistical_distance(half, u) == Fraction(3, 8)


@settings(max_examples=40, deadline=None)
@given(dists(2), dists(2), st.fractions(min_value=0, max_value=1))
def test_mixture_keeps_unit_mass_and_interpolates_distance(d, e, w):
    mixed = mixture(d, e, w)
    assert mixed.total_mass() == 1
    assert statistical_distance(mixed, e) == w * statistical_distance(d, e)


def test_parallel_repeat_respects_cap():
    d = BitStringDist.bernoulli_product(2, Fraction(3, 4))
    assert parallel_repeat(d, 3).n == 6
    with pytest.raises(BudgetExceeded):
        parallel_repeat(d, 13)
    # the likelihood-pair path has no such cap
    assert 0 < parallel_repeat_sd(d, 13) < 1


def test_displayed_amplification_bound_fails_at_small_copies():
    bound = amplification_bounds(BitStringDist.bernoulli_product(2, Fraction(3, 4)), 8)
    assert bound.base_sd == Fraction(5, 16)
    assert bound.sound_holds
    assert not bound.stated_holds
    assert 0.70 < float(bound.exact_sd) < 0.72
    assert bound.stated_bound > 0.9


def test_uniform_base_is_degenerate():
    bound = amplification_bounds(BitStringDist.uniform(2), 4)
    assert bound.degenerate
    assert bound.exact_sd == 0
    assert bound.sound_holds and bound.stated_holds


def test_conditional_mass_bound_on_sticky_chain():
    d = BitStringDist(3, {x: Fraction(1, 8) for x in all_strings(3)})
    assert conditional_mass_bound(d, 1) == 0
    skewed = BitStringDist.bernoulli_product(3, Fraction(1, 16))
    # every 1 bit has conditional 1/16 < 1/(2·4)
    violating = conditional_mass_bound(skewed, 4)
    assert violating == 1 - Fraction(15, 16) ** 3
    assert violating <= Fraction(3, 4)


def test_json_files_round_trip(tmp_path):
    d = BitStringDist.bernoulli_product(2, Fraction(1, 3))
    assert load_dist(dump_dist(d, tmp_path / "d.json")) == d
