from pathlib import Path
import sys

import pytest
from hypothesis import given, settings, strategies as st

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mclab.kernels import InvalidProgram, MachineTimeout, OracleMiss, all_strings
from mclab.kernels.utm import (
    Program,
    UtmConfig,
    build_oracle,
    count_low_complexity,
    description_overhead,
    execute,
    export_csv,
    gamma0_encode,
    gamma_encode,
    index_description,
    load_oracle,
    run_program,
    save_oracle,
)
from mclab.policy import BudgetExceeded, BudgetGate


@pytest.fixture(scope="module")
def small_oracle():
    return build_oracle(UtmConfig(max_program_len=8))


def test_gamma_codes_are_prefix_free_for_small_values():
    assert gamma_encode(1) == "1"
    assert gamma_encode(5) == "00101"
    assert gamma0_encode(0) == "1"
    codes = [gamma0_encode(k) for k in range(40)]
    for a in codes:
        for b in codes:
            if a != b:
                assert not b.startswith(a)


def test_literal_program_prints_its_tail():
    assert execute(Program("000101"), UtmConfig()) == "101"
    assert execute(Program("000"), UtmConfig()) == ""


def test_register_instructions():
    # PUSH 1, REP 2
    assert execute(Program("0101" + "100" + gamma0_encode(2)), UtmConfig()) == "11"
    # OUT 0, PUSH 1, DOUBLE, EMIT
    assert execute(Program("0010" + "0101" + "101" + "011"), UtmConfig()) == "011"


def test_step_cap_raises_timeout():
    with pytest.raises(MachineTimeout):
        execute(Program("0001111111"), UtmConfig(step_cap=5))


def test_truncated_opcode_is_invalid():
    with pytest.raises(InvalidProgram):
        execute(Program("00110"), UtmConfig())


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="01", min_size=1, max_size=14))
def test_execution_is_deterministic(bits):
    cfg = UtmConfig(step_cap=200)
    outcomes = []
    for _ in range(2):
        try:
            outcomes.append(execute(Program(bits), cfg))
        except (InvalidProgram, MachineTimeout) as exc:
            outcomes.append(type(exc))
    assert outcomes[0] == outcomes[1]


def test_run_program_enforces_length_limit():
    with pytest.raises(InvalidProgram):
        run_program(Program("000" + "1" * 10), UtmConfig(max_program_len=8))


def test_index_description_reproduces_member():
    cfg = UtmConfig()
    desc = index_description("zeros", 4, (4, 2), 1, cfg)
    assert desc.member == "0000"
    assert desc.high_size == 1
    assert desc.index_bits == 0
    assert execute(desc.program, cfg) == "0000"
    assert desc.program.length == desc.overhead
    assert desc.overhead == description_overhead("zeros", 4, (4, 2), cfg)


def test_literal_bound_and_counting(small_oracle):
    for x in all_strings(5):
        assert small_oracle.k_value(x) is not None
        assert small_oracle.k_value(x) <= len(x) + 3
    for s in range(0, 9):
        assert count_low_complexity(small_oracle, 5, s) <= 2 ** (s + 1) - 2
    assert sum(small_oracle.level_counts().values()) == len(small_oracle)
    assert len(small_oracle) <= UtmConfig(max_program_len=8).enumeration_size


def test_witness_runs_to_its_string(small_oracle):
    cfg = small_oracle.config
    for x in ["", "1", "0101", "11111111"]:
        witness = small_oracle.witness(x)
        if witness is None:
            continue
        assert run_program(witness, cfg) == x
        assert witness.length == small_oracle.k_value(x)


def test_count_above_l_max_is_refused(small_oracle):
    with pytest.raises(OracleMiss):
        count_low_complexity(small_oracle, 5, 9)


def test_budget_gate_blocks_large_builds():
    with pytest.raises(BudgetExceeded):
        build_oracle(UtmConfig(max_program_len=10), BudgetGate(ceiling=100))


def test_saved_oracle_loads_back(tmp_path, small_oracle):
    path = save_oracle(small_oracle, tmp_path / "oracle.kto")
    loaded = load_oracle(path)
    assert loaded.config == small_oracle.config
    assert dict(loaded.table) == dict(small_oracle.table)

    table = export_csv(small_oracle, tmp_path / "oracle.csv")
    lines = table.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x_hex,k,witness_hex"
    assert len(lines) == len(small_oracle) + 1


def test_load_rejects_foreign_files(tmp_path):
    bogus = tmp_path / "bogus.kto"
    bogus.write_bytes(b"NOPE")
    with pytest.raises(ValueError):
        load_oracle(bogus)


def test_parallel_build_matches_serial_build():
    cfg = UtmConfig(max_program_len=6)
    assert dict(build_oracle(cfg, workers=2).table) == dict(build_oracle(cfg).table)


def test_larger_step_caps_never_raise_complexity():
    tight = build_oracle(UtmConfig(step_cap=4, max_program_len=8)).table
    loose = build_oracle(UtmConfig(step_cap=10_000, max_program_len=8)).table
    assert set(tight) <= set(loose)
    assert all(loose[x][0] <= length for x, (length, _) in tight.items())
