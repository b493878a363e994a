from fractions import Fraction
from pathlib import Path
import sys

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mclab.agents import ConfigInvalid
from mclab.experiments import (
    CLAIMS,
    EXPERIMENTS,
    CellContext,
    ExperimentConfig,
    cell_seed,
    claims_for,
    experiment_checks,
    load_machine_config,
)
from mclab.kernels.utm import UtmConfig, build_oracle

CONFIGS = Path(__file__).resolve().parents[1] / "data" / "configs"


def _context(experiment: str, n: int, oracle=None, **overrides) -> CellContext:
    cfg = ExperimentConfig(experiment, (n,), seed=3, overrides=overrides)

    def provide():
        if oracle is None:
            raise AssertionError("this cell should not need an oracle")
        return oracle

    return CellContext(experiment, n, 0, cell_seed(3, 0), cfg.params, provide)


@pytest.fixture(scope="module")
def oracle():
    return build_oracle(UtmConfig(max_program_len=11))


def test_every_experiment_reports_on_registered_claims():
    used = set()
    for name in EXPERIMENTS:
        assert experiment_checks(name)
        assert claims_for(name)
        used.update(claims_for(name))
    assert used == set(CLAIMS)


def test_rows_need_registered_checks():
    ctx = _context("E6", 4)
    assert ctx.row("truncation", 0, 0, True).claim == "padding-amplification"
    with pytest.raises(KeyError):
        ctx.row("made_up", 0, 0, True)


def test_cell_seeds_are_stable_and_distinct():
    assert cell_seed(7, 0) == cell_seed(7, 0)
    assert len({cell_seed(7, i) for i in range(16)}) == 16
    assert 0 <= cell_seed(2**64 - 1, 3) < 2**63


@pytest.mark.parametrize("name", sorted(EXPERIMENTS))
def test_shipped_configs_load(name):
    cfg = ExperimentConfig.load(CONFIGS / f"{name.lower()}.toml")
    assert cfg.experiment == name
    assert all(n <= cfg.spec.max_n for n in cfg.n_grid)


def test_fraction_strings_are_coerced():
    cfg = ExperimentConfig.load(CONFIGS / "e1.toml")
    assert cfg.params["c"] == Fraction(11, 10)
    assert cfg.params["grid"] == list(cfg.n_grid)


def test_config_hash_tracks_semantics_only(tmp_path):
    a = ExperimentConfig.from_mapping({"experiment": "E6", "n_grid": [8, 4], "seed": 1})
    b = ExperimentConfig.from_mapping(
        {"experiment": "E6", "n_grid": [4, 8], "seed": 1, "output_dir": str(tmp_path)}
    )
    assert a.n_grid == (4, 8)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != ExperimentConfig.from_mapping({"experiment": "E6", "seed": 2}).config_hash()


@pytest.mark.parametrize(
    "data",
    [
        {"n_grid": [8]},
        {"experiment": "E9"},
        {"experiment": "E6", "n_grid": [40]},
        {"experiment": "E6", "seed": -1},
        {"experiment": "E6", "params": {"nope": 1}},
        {"experiment": "E3", "oracle": {"colour": "red"}},
        {"experiment": "E6", "extra": True},
    ],
)
def test_invalid_configs_are_rejected(data):
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_mapping(data)


def test_missing_config_file():
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.load(CONFIGS / "missing.toml")


def test_oracle_defaults_follow_grid():
    cfg = ExperimentConfig.from_mapping({"experiment": "E3", "n_grid": [6, 8]})
    assert cfg.oracle_config().max_program_len == 11
    with pytest.raises(ConfigInvalid):
        ExperimentConfig.from_mapping(
            {"experiment": "E3", "oracle": {"max_program_len": 99}}
        ).oracle_config()


def test_machine_config_for_oracle_builds():
    machine, out = load_machine_config(CONFIGS / "oracle.toml")
    assert machine.max_program_len == 14
    assert out.name == "oracle_l14.kto"


def test_e6_cell_rows_pass():
    rows = EXPERIMENTS["E6"].run(_context("E6", 8))
    assert rows
    assert all(row.passed for row in rows if not row.advisory)
    assert {row.check for row in rows} <= experiment_checks("E6")


def test_e5_cell_rows_pass():
    ctx = _context("E5", 4, samplers=["block_or"], quantum="sticky")
    rows = EXPERIMENTS["E5"].run(ctx)
    assert {row.check for row in rows} == experiment_checks("E5")
    assert all(row.passed for row in rows)


def test_e1_cell_rows_pass():
    rows = EXPERIMENTS["E1"].run(_context("E1", 4, hoeffding_reps=40_000))
    assert {row.check for row in rows} == experiment_checks("E1")
    assert all(row.passed for row in rows)


def test_e2_cell_rows_pass_above_the_largest_complexity(oracle):
    rows = EXPERIMENTS["E2"].run(_context("E2", 8, oracle, s1_rules=["k_max"]))
    assert {row.check for row in rows} == experiment_checks("E2")
    assert {row.params["delta"] for row in rows} == {3, 6, 9}
    assert all(row.passed for row in rows)


def test_e2_refuses_an_oracle_that_misses_strings(oracle):
    with pytest.raises(ConfigInvalid):
        EXPERIMENTS["E2"].run(_context("E2", 9, oracle))


def test_e3_cell_rows_pass(oracle):
    rows = EXPERIMENTS["E3"].run(_context("E3", 8, oracle))
    assert {row.check for row in rows} == experiment_checks("E3")
    assert all(row.passed for row in rows)


def test_e4_cell_rows_pass(oracle):
    rows = EXPERIMENTS["E4"].run(_context("E4", 8, oracle))
    assert {row.check for row in rows} == experiment_checks("E4")
    assert all(row.passed for row in rows)
