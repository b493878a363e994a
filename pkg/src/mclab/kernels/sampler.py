"""Sampler backends: exact tables, a statevector circuit simulator and seeded samplers."""
from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from ..policy import BudgetExceeded, BudgetGate
from . import InvalidConfig, Prob, Sampler, TooManyQubits, all_strings, check_bits, make_rng
from .dist import BitStringDist, mixture, statistical_distance

_LOGGER = logging.getLogger(__name__)

MAX_QUBITS = 12
MAX_SEED_LEN = 20
NORM_TOL = 1e-10
SNAP_DENOMINATOR = 10**12

# ---------------------------------------------------------------------------
# Table sampler
# ---------------------------------------------------------------------------


@dataclass
class TableSampler:
    """Samples straight from an exact table."""

    dist: BitStringDist
    _support: list[str] = field(init=False, repr=False)
    _cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._support = list(self.dist.support())
        weights = np.array([float(p) for p in self.dist.probs.values()], dtype=np.float64)
        self._cumulative = np.cumsum(weights / weights.sum())

    @property
    def n(self) -> int:
        return self.dist.n

    def exact_dist(self) -> BitStringDist:
        return self.dist

    def sample(self, rng: np.random.Generator) -> str:
        return self.sample_many(rng, 1)[0]

    def sample_many(self, rng: np.random.Generator, shots: int) -> list[str]:
        draws = np.searchsorted(self._cumulative, rng.random(shots), side="right")
        draws = np.minimum(draws, len(self._support) - 1)
        return [self._support[i] for i in draws]


# ---------------------------------------------------------------------------
# Quantum circuits
# ---------------------------------------------------------------------------

SINGLE_QUBIT_GATES = {"H", "X", "T", "RZ"}
TWO_QUBIT_GATES = {"CNOT", "CZ"}
GATE_SET = SINGLE_QUBIT_GATES | TWO_QUBIT_GATES

_H = np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_T = np.diag([1.0, np.exp(1j * np.pi / 4)]).astype(np.complex128)
_I = np.eye(2, dtype=np.complex128)
_P0 = np.diag([1.0, 0.0]).astype(np.complex128)
_P1 = np.diag([0.0, 1.0]).astype(np.complex128)
_Z = np.diag([1.0, -1.0]).astype(np.complex128)


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-1j * theta / 2), np.exp(1j * theta / 2)]).astype(np.complex128)


@dataclass(frozen=True)
class Gate:
    name: str
    targets: tuple[int, ...]
    angle: Optional[float] = None

    def matrix(self) -> np.ndarray:
        if self.name == "H":
            return _H
        if self.name == "X":
            return _X
        if self.name == "T":
            return _T
        if self.name == "RZ":
            return _rz(float(self.angle))
        raise ValueError(f"{self.name} is not a single-qubit gate")


@dataclass(frozen=True)
class QuantumCircuit:
    """Gate list over ``qubits`` wires; qubit 0 is the most significant basis bit."""

    qubits: int
    gates: tuple[Gate, ...]
    measured: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.qubits > MAX_QUBITS:
            raise TooManyQubits(f"{self.qubits} qubits requested, cap is {MAX_QUBITS}")
        if self.qubits < 1:
            raise InvalidConfig("a circuit needs at least one qubit")
        for gate in self.gates:
            if gate.name not in GATE_SET:
                raise InvalidConfig(f"unsupported gate {gate.name}")
            arity = 1 if gate.name in SINGLE_QUBIT_GATES else 2
            if len(gate.targets) != arity or len(set(gate.targets)) != arity:
                raise InvalidConfig(f"{gate.name} takes {arity} distinct targets")
            if any(not 0 <= q < self.qubits for q in gate.targets):
                raise InvalidConfig(f"{gate.name} targets {gate.targets} out of range")
            if gate.name == "RZ" and gate.angle is None:
                raise InvalidConfig("RZ needs an angle")
        if not self.measured or len(set(self.measured)) != len(self.measured):
            raise InvalidConfig("measured qubits must be a non-empty set")
        if any(not 0 <= q < self.qubits for q in self.measured):
            raise InvalidConfig("measured qubit out of range")

    @property
    def n(self) -> int:
        return len(self.measured)

    def to_json(self) -> dict:
        gates = []
        for gate in self.gates:
            entry: list = [gate.name, list(gate.targets)]
            if gate.angle is not None:
                entry.append(gate.angle)
            gates.append(entry)
        return {"qubits": self.qubits, "gates": gates, "measured": list(self.measured)}

    @classmethod
    def from_json(cls, data: Mapping) -> "QuantumCircuit":
        gates = []
        for entry in data["gates"]:
            name, targets = entry[0], tuple(int(t) for t in entry[1])
            angle = float(entry[2]) if len(entry) > 2 else None
            gates.append(Gate(name, targets, angle))
        return cls(int(data["qubits"]), tuple(gates), tuple(int(q) for q in data["measured"]))


def load_circuit(path: Path) -> QuantumCircuit:
    return QuantumCircuit.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _apply_single(state: np.ndarray, matrix: np.ndarray, target: int) -> np.ndarray:
    state = np.tensordot(matrix, state, axes=([1], [target]))
    return np.moveaxis(state, 0, target)


def _apply_cnot(state: np.ndarray, control: int, target: int) -> np.ndarray:
    state = state.copy()
    index: list = [slice(None)] * state.ndim
    index[control] = 1
    block = state[tuple(index)]
    axis = target if target < control else target - 1
    state[tuple(index)] = np.flip(block, axis=axis).copy()
    return state


def _apply_cz(state: np.ndarray, a: int, b: int) -> np.ndarray:
    state = state.copy()
    index: list = [slice(None)] * state.ndim
    index[a] = 1
    index[b] = 1
    state[tuple(index)] *= -1
    return state


def simulate_statevector(circuit: QuantumCircuit) -> np.ndarray:
    """Final amplitudes over all 2^qubits basis states, starting from |0...0>."""

    state = np.zeros((2,) * circuit.qubits, dtype=np.complex128)
    state[(0,) * circuit.qubits] = 1.0
    for gate in circuit.gates:
        if gate.name == "CNOT":
            state = _apply_cnot(state, *gate.targets)
        elif gate.name == "CZ":
            state = _apply_cz(state, *gate.targets)
        else:
            state = _apply_single(state, gate.matrix(), gate.targets[0])
        norm = float(np.vdot(state, state).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ArithmeticError(f"statevector norm drifted to {norm} after {gate.name}")
    return state.reshape(-1)


def _embed(matrix: np.ndarray, target: int, qubits: int) -> np.ndarray:
    factors = [matrix if q == target else _I for q in range(qubits)]
    result = factors[0]
    for factor in factors[1:]:
        result = np.kron(result, factor)
    return result


def dense_unitary(circuit: QuantumCircuit) -> np.ndarray:
    """Full 2^q x 2^q unitary built from Kronecker products, as an independent oracle."""

    dim = 2**circuit.qubits
    unitary = np.eye(dim, dtype=np.complex128)
    for gate in circuit.gates:
        if gate.name in SINGLE_QUBIT_GATES:
            step = _embed(gate.matrix(), gate.targets[0], circuit.qubits)
        else:
            a, b = gate.targets
            second = _X if gate.name == "CNOT" else _Z
            idle = _embed(_P0, a, circuit.qubits)
            active = _embed(_P1, a, circuit.qubits) @ _embed(second, b, circuit.qubits)
            step = idle + active
        unitary = step @ unitary
    return unitary


def _born_probabilities(circuit: QuantumCircuit, amplitudes: np.ndarray) -> np.ndarray:
    probs = np.abs(amplitudes.reshape((2,) * circuit.qubits)) ** 2
    unmeasured = tuple(q for q in range(circuit.qubits) if q not in circuit.measured)
    if unmeasured:
        probs = probs.sum(axis=unmeasured)
    kept = [q for q in range(circuit.qubits) if q in circuit.measured]
    order = [kept.index(q) for q in circuit.measured]
    return np.transpose(probs, order).reshape(-1)


def circuit_exact_dist(circuit: QuantumCircuit) -> BitStringDist:
    """Born-rule law of the measured bits, snapped to rationals and renormalized exactly."""

    probs = _born_probabilities(circuit, simulate_statevector(circuit))
    if abs(float(probs.sum()) - 1.0) > NORM_TOL:
        raise ArithmeticError("Born probabilities do not sum to 1")
    snapped = {}
    for x, p in zip(all_strings(circuit.n), probs):
        value = Fraction(float(p)).limit_denominator(SNAP_DENOMINATOR)
        if value:
            snapped[x] = value
    total = sum(snapped.values(), Fraction(0))
    return BitStringDist(circuit.n, {x: p / total for x, p in snapped.items()})


@dataclass
class CircuitSampler:
    circuit: QuantumCircuit
    _probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        probs = _born_probabilities(self.circuit, simulate_statevector(self.circuit))
        self._probs = probs / probs.sum()

    @property
    def n(self) -> int:
        return self.circuit.n

    def exact_dist(self) -> BitStringDist:
        return circuit_exact_dist(self.circuit)

    def sample(self, rng: np.random.Generator) -> str:
        return self.sample_many(rng, 1)[0]

    def sample_many(self, rng: np.random.Generator, shots: int) -> list[str]:
        draws = rng.choice(len(self._probs), size=shots, p=self._probs)
        return [format(int(i), f"0{self.n}b") for i in draws]


def random_clifford_t(qubits: int, depth: int, seed: int) -> QuantumCircuit:
    """Seeded random circuit over {H, T, X, CNOT, CZ}, all qubits measured."""

    rng = make_rng(seed)
    names = ("H", "T", "X", "CNOT", "CZ") if qubits > 1 else ("H", "T", "X")
    gates = []
    for _ in range(depth):
        name = names[int(rng.integers(len(names)))]
        if name in TWO_QUBIT_GATES:
            a, b = (int(q) for q in rng.choice(qubits, size=2, replace=False))
            gates.append(Gate(name, (a, b)))
        else:
            gates.append(Gate(name, (int(rng.integers(qubits)),)))
    return QuantumCircuit(qubits, tuple(gates), tuple(range(qubits)))


def bell_circuit() -> QuantumCircuit:
    return QuantumCircuit(2, (Gate("H", (0,)), Gate("CNOT", (0, 1))), (0, 1))


def interference_circuit(n: int) -> QuantumCircuit:
    """Fixed Clifford+T+RZ circuit with a visibly non-uniform output law."""

    gates = [Gate("H", (q,)) for q in range(n)]
    gates += [Gate("T", (q,)) for q in range(0, n, 2)]
    gates += [Gate("CNOT", (q, q + 1)) for q in range(n - 1)]
    gates += [Gate("RZ", (q,), math.pi * (q + 1) / 4) for q in range(1, n, 2)]
    gates.append(Gate("H", (0,)))
    if n > 1:
        gates.append(Gate("CZ", (0, n - 1)))
    gates += [Gate("H", (q,)) for q in range(1, n, 2)]
    return QuantumCircuit(n, tuple(gates), tuple(range(n)))


# ---------------------------------------------------------------------------
# Seeded samplers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeededSampler:
    """Deterministic map from t-bit seeds to n-bit outputs."""

    name: str
    seed_len: int
    n: int
    eval: Callable[[str], str] = field(compare=False)

    def __call__(self, seed: str) -> str:
        return self.eval(check_bits(seed, self.seed_len))

    def exact_dist(self) -> BitStringDist:
        return seeded_exact_dist(self)

    def sample(self, rng: np.random.Generator) -> str:
        return self.sample_many(rng, 1)[0]

    def sample_many(self, rng: np.random.Generator, shots: int) -> list[str]:
        seeds = rng.integers(0, 2, size=(shots, self.seed_len))
        return [self.eval("".join("1" if b else "0" for b in row)) for row in seeds]


def seeded_exact_dist(sampler: SeededSampler, gate: Optional[BudgetGate] = None) -> BitStringDist:
    if sampler.seed_len > MAX_SEED_LEN:
        raise BudgetExceeded(f"seed length {sampler.seed_len} above {MAX_SEED_LEN}")
    if gate is not None:
        gate.require(f"seed enumeration for {sampler.name}", 2**sampler.seed_len)
    counts = Counter(sampler.eval(r) for r in all_strings(sampler.seed_len))
    total = 2**sampler.seed_len
    return BitStringDist(sampler.n, {x: Fraction(c, total) for x, c in counts.items()})


def _parity(bits: str) -> str:
    return "1" if bits.count("1") % 2 else "0"


def _identity(n: int, seed_len: int, **_: object) -> Callable[[str], str]:
    return lambda r: r[:n]


def _constant(n: int, seed_len: int, value: Optional[str] = None, **_: object) -> Callable[[str], str]:
    out = check_bits(value, n) if value is not None else "0" * n
    return lambda r: out


def _parity_prefix(n: int, seed_len: int, **_: object) -> Callable[[str], str]:
    """Bit j (from 1) is the parity of the first max(1, j·seed_len // n) seed bits."""

    cuts = [max(1, (j + 1) * seed_len // n) for j in range(n)]
    return lambda r: "".join(_parity(r[:cut]) for cut in cuts)


def _block_or(n: int, seed_len: int, **_: object) -> Callable[[str], str]:
    width = seed_len // n
    return lambda r: "".join(
        "1" if "1" in r[j * width : (j + 1) * width] else "0" for j in range(n)
    )


def _sticky(n: int, seed_len: int, **_: object) -> Callable[[str], str]:
    """First bit from the seed; later bits flip when both of a seed pair are 1."""

    def run(r: str) -> str:
        out = [r[0]]
        for j in range(1, n):
            flip = r[2 * j - 1] == "1" and r[2 * j] == "1"
            out.append(("1" if out[-1] == "0" else "0") if flip else out[-1])
        return "".join(out)

    return run


BUILTIN_EVALS: dict[str, tuple[Callable[..., Callable[[str], str]], Callable[[int], int]]] = {
    "identity": (_identity, lambda n: n),
    "constant": (_constant, lambda n: n),
    "parity_prefix": (_parity_prefix, lambda n: 2 * n),
    "block_or": (_block_or, lambda n: 2 * n),
    "sticky": (_sticky, lambda n: 2 * n - 1),
}


def builtin_sampler(name: str, n: int, seed_len: Optional[int] = None, **params: object) -> SeededSampler:
    try:
        factory, default_len = BUILTIN_EVALS[name]
    except KeyError as exc:
        raise InvalidConfig(f"unknown seeded sampler {name!r}") from exc
    seed_len = default_len(n) if seed_len is None else seed_len
    if seed_len < 1 or n < 1:
        raise InvalidConfig("seeded samplers need positive seed and output lengths")
    if name in {"block_or", "parity_prefix"} and seed_len < n:
        raise InvalidConfig(f"{name} needs at least one seed bit per output bit")
    if name == "sticky" and seed_len < 2 * n - 1:
        raise InvalidConfig("sticky needs 2n-1 seed bits")
    if name == "identity" and seed_len < n:
        raise InvalidConfig("identity needs seed_len >= n")
    return SeededSampler(name, seed_len, n, factory(n, seed_len, **params))


def table_sampler(seed_len: int, n: int, table: Mapping[str, str], name: str = "table") -> SeededSampler:
    if len(table) != 2**seed_len:
        raise InvalidConfig("truth table must list every seed")
    frozen = {check_bits(r, seed_len): check_bits(x, n) for r, x in table.items()}
    return SeededSampler(name, seed_len, n, frozen.__getitem__)


def seeded_from_json(data: Mapping) -> SeededSampler:
    kind = data.get("kind", "builtin")
    if kind == "builtin":
        return builtin_sampler(
            data["name"], int(data["n"]), data.get("seed_len"), **data.get("params", {})
        )
    if kind == "table":
        return table_sampler(int(data["seed_len"]), int(data["n"]), data["table"])
    raise InvalidConfig(f"unknown seeded sampler kind {kind!r}")


def load_seeded(path: Path) -> SeededSampler:
    return seeded_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------


def empirical_check(sampler: Sampler, shots: int, seed: int) -> Prob:
    """SD between the histogram of ``shots`` draws and the exact law."""

    rng = make_rng(seed)
    draws = sampler.sample_many(rng, shots)
    histogram = BitStringDist.from_counts(sampler.n, Counter(draws))
    return statistical_distance(histogram, sampler.exact_dist())


def empirical_threshold(n: int, shots: int) -> float:
    return 3 * math.sqrt(2**n / shots)


# ---------------------------------------------------------------------------
# Corpus
# ---------------------------------------------------------------------------


def _sticky_chain(n: int, stay: Fraction = Fraction(3, 4)) -> BitStringDist:
    table = {}
    for x in all_strings(n):
        p = Fraction(1, 2)
        for a, b in zip(x, x[1:]):
            p *= stay if a == b else 1 - stay
        table[x] = p
    return BitStringDist(n, table)


def _low_weight(n: int, weight: int = 2) -> BitStringDist:
    return BitStringDist.from_weights(
        n, {x: 1 for x in all_strings(n) if x.count("1") <= weight}
    )


def _sparse(n: int) -> BitStringDist:
    """Uniform over strings whose first n - m bits are zero, m = max(1, n // 2 - 1)."""

    free = max(1, n // 2 - 1)
    lead = "0" * (n - free)
    return BitStringDist.from_weights(n, {lead + tail: 1 for tail in all_strings(free)})


CORPUS: dict[str, Callable[[int], BitStringDist]] = {
    "uniform": BitStringDist.uniform,
    "zeros": lambda n: BitStringDist.point_mass("0" * n),
    "bernoulli": lambda n: BitStringDist.bernoulli_product(n, Fraction(3, 4)),
    "skewed": lambda n: BitStringDist.bernoulli_product(n, Fraction(255, 256)),
    "sticky": _sticky_chain,
    "low_weight": _low_weight,
    "sparse": _sparse,
    "circuit": lambda n: circuit_exact_dist(interference_circuit(n)),
    "half_mix": lambda n: mixture(
        BitStringDist.bernoulli_product(n, Fraction(3, 4)), BitStringDist.uniform(n), Fraction(1, 2)
    ),
    "block_or": lambda n: seeded_exact_dist(builtin_sampler("block_or", n)),
}


@lru_cache(maxsize=None)
def corpus_dist(name: str, n: int) -> BitStringDist:
    try:
        family = CORPUS[name]
    except KeyError as exc:
        raise InvalidConfig(f"unknown corpus distribution {name!r}") from exc
    _LOGGER.debug("building corpus distribution %s at n=%d", name, n)
    return family(n)


def corpus_names(n: int, exclude: Sequence[str] = ()) -> list[str]:
    """Corpus members that are constructible at length ``n``."""

    names = []
    for name in CORPUS:
        if name in exclude:
            continue
        if name == "block_or" and 2 * n > MAX_SEED_LEN:
            continue
        if name == "circuit" and n > MAX_QUBITS:
            continue
        names.append(name)
    return names
