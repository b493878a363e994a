from fractions import Fraction
from pathlib import Path
from types import SimpleNamespace
import sys

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mclab.kernels import LengthMismatch, PreconditionUnmet
from mclab.kernels.dist import BitStringDist, statistical_distance
from mclab.kernels.gapk import CoinDecider, GapKParams, PerfectDecider, ThresholdDecider
from mclab.kernels.qprg import (
    Distinguisher,
    NuQprgSpec,
    QprgSpec,
    amplify,
    amplify_blocks,
    certified_decider,
    distinguisher_identity,
    load_qprg,
    mixture_instance,
    nu_advantage,
    nu_mixture_instance,
    verify_claim_high,
    verify_claim_low,
)
from mclab.kernels.sampler import corpus_dist
from mclab.kernels.utm import UtmConfig, build_oracle
from mclab.policy import BudgetExceeded

DATA = Path(__file__).resolve().parents[1] / "data" / "samplers"


@pytest.fixture(scope="module")
def oracle():
    return build_oracle(UtmConfig(max_program_len=10))


def test_spec_rejects_overclaimed_distance():
    sparse = corpus_dist("sparse", 6)
    assert QprgSpec.of(sparse, Fraction(7, 8)).sd == Fraction(15, 16)
    with pytest.raises(PreconditionUnmet):
        QprgSpec.of(sparse, Fraction(31, 32))


def test_spec_file_resolves_corpus_generator():
    spec = load_qprg(DATA / "qprg_sparse.json")
    assert spec.n == 8
    assert spec.sd == Fraction(31, 32)


def test_amplify_picks_block_length_and_copies():
    amp = amplify("bernoulli", 16, 0.5)
    assert (amp.block_len, amp.copies) == (2, 8)
    assert not amp.truncated
    check = amp.bound_check()
    assert check.sound_holds
    assert not check.stated_holds

    cut = amplify("bernoulli", 12, 0.5)
    assert (cut.block_len, cut.copies) == (2, 7)
    assert cut.truncated
    assert cut.full_blocks == 6
    assert cut.sd_to_uniform() <= cut.untruncated_sd()


def test_amplify_respects_cap():
    with pytest.raises(BudgetExceeded):
        amplify("uniform", 16, 0.5, cap=10)


def test_likelihood_dp_matches_dense_output():
    base = BitStringDist.bernoulli_product(2, Fraction(3, 4))
    amp = amplify_blocks(base, 3)
    dense = amp.exact_dist()
    assert amp.sd_to_uniform() == statistical_distance(dense, BitStringDist.uniform(6))

    odd = amplify("sticky", 5, 0.5)
    assert odd.sd_to_uniform() == statistical_distance(odd.exact_dist(), BitStringDist.uniform(5))


def test_mixture_instances():
    gen = corpus_dist("sparse", 4)
    q = mixture_instance(gen)
    assert q.prob("0000") == Fraction(1, 4) + Fraction(1, 32)
    spec = NuQprgSpec.of([gen] + [BitStringDist.uniform(4)] * 3, mu_star=1)
    nu = nu_mixture_instance(spec)
    assert nu.prob("0000") == Fraction(1, 4) * q.prob("0000") + Fraction(3, 4) * Fraction(1, 16)
    with pytest.raises(LengthMismatch):
        NuQprgSpec.of([gen] * 3, mu_star=1)


def test_nu_mixture_dilutes_the_good_advice():
    gen = corpus_dist("sparse", 4)
    uniform = BitStringDist.uniform(4)
    spec = NuQprgSpec.of([uniform, uniform, gen, uniform], mu_star=3)
    diluted = statistical_distance(gen, uniform) / 8
    assert statistical_distance(nu_mixture_instance(spec), uniform) == diluted


def test_uniform_mass_of_low_complexity(oracle):
    report = verify_claim_high(oracle, 6, 2)
    assert report.holds
    assert report.mass <= Fraction(1, 2)


def test_sparse_generator_satisfies_partition():
    report = verify_claim_low(corpus_dist("sparse", 8), 0.75)
    assert report.complete
    assert report.count_holds
    assert report.mass_holds
    assert report.heavy_mass_holds
    assert report.sizes[1] + report.sizes[2] == 8


def test_uniform_generator_fails_hypothesis():
    with pytest.raises(PreconditionUnmet) as excinfo:
        verify_claim_low(BitStringDist.uniform(6), 0.75)
    assert excinfo.value.report.sd == 0


@pytest.mark.parametrize("make", ["coin", "perfect", "threshold"])
def test_distinguisher_identity_has_zero_residual(oracle, make):
    gen = corpus_dist("bernoulli", 6)
    params = GapKParams.around(6, 9, 3)
    decider = {
        "coin": CoinDecider(Fraction(1, 3)),
        "perfect": PerfectDecider(params, oracle),
        "threshold": ThresholdDecider(mixture_instance(gen).prob, 9, 3),
    }[make]
    report = distinguisher_identity(decider, gen, params, oracle)
    assert report.residual == 0
    assert report.corrections_dominated
    assert report.advantage == Distinguisher(decider).advantage(gen)


def test_certified_decider_accepts_the_whole_generator(oracle):
    gen = corpus_dist("sparse", 8)
    decider = certified_decider("sparse", 8, oracle, s1=4, cfg=UtmConfig())
    distinguisher = Distinguisher(decider)
    assert distinguisher.acceptance(gen) == 1
    assert distinguisher.advantage(gen) >= Fraction(1, 2)
    assert decider.certificate_length > 0


def test_advice_averaging():
    starts_zero = SimpleNamespace(accept_probability=lambda x: Fraction(int(x.startswith("00"))))
    gens = [BitStringDist.uniform(4)] * 3 + [corpus_dist("sparse", 4)]
    report = nu_advantage(starts_zero, NuQprgSpec.of(gens, mu_star=4))
    assert report.good_advice == Fraction(3, 4)
    assert report.averaged == report.good_advice / 4


def test_partition_cut_is_exact_on_a_power_of_two_boundary():
    # n = 16, tau = 3/4: the cut sits at 2^-12, exactly the mass of each support string
    gen = BitStringDist.from_weights(16, {format(i, "012b") + "0000": 1 for i in range(2**12)})
    with pytest.raises(PreconditionUnmet) as excinfo:
        verify_claim_low(gen, 0.75)
    assert excinfo.value.report.sizes == (2**16 - 2**12, 0, 2**12)
