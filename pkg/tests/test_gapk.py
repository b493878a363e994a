from fractions import Fraction
import json
from pathlib import Path
from types import SimpleNamespace
import sys

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mclab.kernels import InvalidConfig, OracleMiss
from mclab.kernels import gapk
from mclab.kernels.gapk import (
    CoinDecider,
    GapKParams,
    Label,
    OracleLabelDecider,
    PerfectDecider,
    ThresholdDecider,
    band_report,
    clears_threshold,
    default_gap,
    dump_instances,
    exact_error_account,
    high_size_cap,
    label_instance,
    strong_error_account,
    threshold_decider,
    verify_high_descriptions,
    yes_error_within,
)
from mclab.kernels.sampler import corpus_dist
from mclab.kernels.utm import Program, UtmConfig, build_oracle, description_overhead


@pytest.fixture(scope="module")
def oracle():
    return build_oracle(UtmConfig(max_program_len=10))


def test_labels_follow_thresholds():
    params = GapKParams(6, 4, 7, 3)
    assert params.label(4) is Label.YES
    assert params.label(5) is Label.PROMISE_VIOLATING
    assert params.label(7) is Label.NO
    assert params.widened(2).s2 == 9
    with pytest.raises(InvalidConfig):
        GapKParams(6, 4, 5, 3)


def test_presets():
    assert default_gap(8) == 9
    params = GapKParams.preset(16)
    assert (params.s1, params.s2, params.gap) == (12, 28, 16)
    around = GapKParams.around(8, 11, 3)
    assert (around.s1, around.s2) == (8, 11)


def test_missing_strings_are_no_only_when_certifiable():
    missing = SimpleNamespace(k_value=lambda x: None, config=SimpleNamespace(max_program_len=5))
    assert label_instance("0000", GapKParams(4, 1, 6, 2), missing).label is Label.NO
    with pytest.raises(OracleMiss):
        label_instance("0000", GapKParams(4, 1, 7, 2), missing)


def test_threshold_is_compared_exactly():
    assert clears_threshold(Fraction(1, 16), 5, 2)
    assert not clears_threshold(Fraction(1, 16) - Fraction(1, 10**12), 5, 2)
    # 2^{-3.5} lies between 1/12 and 1/11
    assert clears_threshold(Fraction(1, 11), 5, 3)
    assert not clears_threshold(Fraction(1, 12), 5, 3)
    assert clears_threshold(0.09, 5, 3)
    assert threshold_decider("0", lambda x: Fraction(1, 12), 5, 3) == "no"
    with pytest.raises(ValueError):
        clears_threshold(Fraction(-1), 5, 3)


def test_yes_error_bound_is_the_cube_root_of_two_to_minus_delta():
    assert yes_error_within(Fraction(1, 2), 3)
    assert not yes_error_within(Fraction(51, 100), 3)
    assert yes_error_within(Fraction(1, 4), 6)
    assert not yes_error_within(Fraction(1, 3), 6)
    assert not yes_error_within(Fraction(7, 10), 3)


def test_exact_threshold_decider_errs_only_near_the_band(oracle):
    q = corpus_dist("sticky", 6)
    s, delta = 9, 3
    params = GapKParams.around(6, s, delta)
    decider = ThresholdDecider(q.prob, s, delta)
    band = band_report(decider, q, params, oracle, s, delta)
    assert band.outside == frozenset()
    assert band.high_size_holds
    assert len(band.low) <= band.low_count_bound


def test_error_accounts(oracle):
    q = corpus_dist("bernoulli", 6)
    params = GapKParams.around(6, 9, 3)
    perfect = exact_error_account(PerfectDecider(params, oracle), q, params, oracle, bound=0)
    assert perfect.total == 0
    assert perfect.within_bound

    coin = exact_error_account(CoinDecider(), q, params, oracle)
    yes_mass = sum(
        (p for x, p in q.items() if label_instance(x, params, oracle).label is Label.YES), Fraction(0)
    )
    assert coin.yes_error_mass == yes_mass / 2

    strong = strong_error_account(CoinDecider(), q, params, oracle)
    assert strong.bound == Fraction(1, 2) - Fraction(1, 6)
    assert strong.schema == "strong"


def test_oracle_label_decider_accepts_certified_strings(oracle):
    descriptions = {"111111": Program("000111111")}
    decider = OracleLabelDecider(oracle, s1=0, descriptions=descriptions)
    assert decider.accept_probability("111111") == 1
    assert decider.accept_probability("101100") == 0


def test_high_members_have_index_descriptions():
    cfg = UtmConfig()
    report = verify_high_descriptions("sticky", 6, 9, 3, cfg)
    assert report.high_size > 0
    assert report.overhead == description_overhead("sticky", 6, (9, 3), cfg)
    # |High| <= floor(100/99 * 2^7.5) = 182 needs at most 8 index bits
    assert high_size_cap(9, 3) == 182
    assert report.index_width_bound == 8
    assert report.folded_threshold == report.overhead + 9
    assert report.longest == report.overhead + report.index_bits < report.folded_threshold
    assert report.uncovered_mass == 0
    assert report.holds


def test_high_members_without_descriptions_count_as_no_errors(monkeypatch):
    monkeypatch.setattr(gapk, "describe_all", lambda *args: {})
    q = corpus_dist("sticky", 6)
    high_mass = sum((p for x, p in q.items() if clears_threshold(p, 9, 3)), Fraction(0))
    decider = ThresholdDecider(q.prob, 9, 3)
    report = verify_high_descriptions("sticky", 6, 9, 3, UtmConfig(), decider=decider)
    assert report.no_error_mass == high_mass > 0
    assert report.uncovered_mass >= report.no_error_mass
    assert not report.holds


def test_instances_dump_as_json_lines(tmp_path, oracle):
    params = GapKParams.around(6, 9, 3)
    instances = [label_instance(x, params, oracle) for x in ["000000", "011010"]]
    path = dump_instances(instances, tmp_path / "instances.jsonl")
    lines = path.read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["x"] for line in lines] == ["000000", "011010"]
    assert {json.loads(line)["label"] for line in lines} <= {label.value for label in Label}
