from fractions import Fraction
from pathlib import Path
import sys

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from mclab.kernels import InvalidConfig, TooManyQubits, make_rng
from mclab.kernels.dist import BitStringDist, statistical_distance
from mclab.kernels.sampler import (
    CircuitSampler,
    Gate,
    QuantumCircuit,
    TableSampler,
    bell_circuit,
    builtin_sampler,
    circuit_exact_dist,
    corpus_dist,
    corpus_names,
    dense_unitary,
    empirical_check,
    empirical_threshold,
    interference_circuit,
    load_circuit,
    load_seeded,
    random_clifford_t,
    simulate_statevector,
    table_sampler,
)
from mclab.policy import BudgetExceeded

DATA = Path(__file__).resolve().parents[1] / "data" / "samplers"


def test_bell_circuit_law_is_exact():
    dist = circuit_exact_dist(bell_circuit())
    assert dict(dist.items()) == {"00": Fraction(1, 2), "11": Fraction(1, 2)}


def test_bell_file_matches_builtin():
    assert load_circuit(DATA / "bell.json").to_json() == bell_circuit().to_json()


@pytest.mark.parametrize("circuit", [interference_circuit(3), random_clifford_t(4, 20, seed=7)])
def test_statevector_agrees_with_dense_unitary(circuit):
    state = simulate_statevector(circuit).reshape(-1)
    reference = dense_unitary(circuit)[:, 0]
    assert np.allclose(state, reference, atol=1e-10)


def test_partial_measurement_marginalizes():
    circuit = QuantumCircuit(2, (Gate("H", (0,)), Gate("CNOT", (0, 1))), (1,))
    assert dict(circuit_exact_dist(circuit).items()) == {"0": Fraction(1, 2), "1": Fraction(1, 2)}


def test_circuit_validation():
    with pytest.raises(TooManyQubits):
        QuantumCircuit(13, (), (0,))
    with pytest.raises(InvalidConfig):
        QuantumCircuit(2, (Gate("CNOT", (0, 0)),), (0, 1))
    with pytest.raises(InvalidConfig):
        QuantumCircuit(2, (Gate("RZ", (0,)),), (0,))


def test_block_or_law():
    sampler = builtin_sampler("block_or", 2)
    assert sampler.seed_len == 4
    assert sampler.exact_dist() == BitStringDist.bernoulli_product(2, Fraction(3, 4))


def test_seeded_file_loads():
    sampler = load_seeded(DATA / "block_or_4.json")
    assert sampler.n == 4
    assert sampler("1" + "0" * (sampler.seed_len - 1)).startswith("1")


def test_table_sampler_requires_full_table():
    with pytest.raises(InvalidConfig):
        table_sampler(2, 1, {"00": "0", "01": "1"})
    sampler = table_sampler(1, 2, {"0": "00", "1": "11"})
    assert dict(sampler.exact_dist().items()) == {"00": Fraction(1, 2), "11": Fraction(1, 2)}


def test_long_seeds_are_refused():
    with pytest.raises(BudgetExceeded):
        builtin_sampler("identity", 21).exact_dist()


@pytest.mark.parametrize("name", ["sticky", "bernoulli"])
def test_empirical_histograms_stay_close(name):
    sampler = TableSampler(corpus_dist(name, 4))
    shots = 20_000
    assert float(empirical_check(sampler, shots, seed=3)) <= empirical_threshold(4, shots)


def test_circuit_sampler_is_seeded():
    sampler = CircuitSampler(interference_circuit(3))
    first = sampler.sample_many(make_rng(11), 50)
    assert first == sampler.sample_many(make_rng(11), 50)
    assert set(first) <= set(sampler.exact_dist().support())


def test_corpus_names_skip_unbuildable_members():
    assert "block_or" not in corpus_names(12)
    assert "circuit" in corpus_names(12)
    assert "circuit" not in corpus_names(13)
    assert statistical_distance(corpus_dist("uniform", 3), corpus_dist("half_mix", 3)) > 0


def test_uniform_histogram_converges():
    sampler = TableSampler(BitStringDist.uniform(4))
    assert float(empirical_check(sampler, 100_000, seed=0)) < 0.02


def test_bell_histogram_converges():
    assert float(empirical_check(CircuitSampler(bell_circuit()), 10_000, seed=0)) < 0.03


def test_parity_prefix_bits_cover_growing_seed_prefixes():
    sampler = builtin_sampler("parity_prefix", 2, seed_len=4)
    assert sampler("1000") == "11"
    assert sampler("1100") == "00"
    assert sampler("0010") == "01"
