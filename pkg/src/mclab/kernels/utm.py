"""Toy register machine and the exhaustive time-bounded Kolmogorov oracle built on it.

Programs are bit strings read as a sequence of 3-bit instructions:

====  ======  ===========================================================
000   LIT     emit every remaining program bit, then halt
001   OUT b   emit bit ``b``
010   PUSH b  append ``b`` to the register
011   EMIT    emit the register
100   REP k   emit the register ``k`` times
101   DOUBLE  register := register + register
110   LOOP k  jump back to the first instruction, at most ``k`` times per site
111   IDX     ``code n s Δ index``: emit a member of a library High set, halt
====  ======  ===========================================================

Naturals are self-delimiting (``gamma0(k)`` is the Elias-gamma code of ``k + 1``).
Every instruction costs one step and every emitted bit another; IDX also pays
``2^n`` steps for scanning the sampler's table.
"""
from __future__ import annotations

import csv
import json
import logging
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping, Optional, Sequence

from ..policy import BudgetGate
from . import (
    IndexOutOfRange,
    InvalidConfig,
    InvalidProgram,
    MachineTimeout,
    OracleMiss,
    check_bits,
)
from .sampler import CORPUS, corpus_dist

_LOGGER = logging.getLogger(__name__)

LIT, OUT, PUSH, EMIT, REP, DOUBLE, LOOP, IDX = (format(op, "03b") for op in range(8))
HEADER_BITS = 3
MAX_PROGRAM_LEN = 24
IDX_MAX_N = 12
SHARD_SIZE = 1 << 12
MAGIC = b"KTO1"

DEFAULT_LIBRARY = ("zeros", "uniform", "bernoulli", "sparse", "skewed", "sticky", "low_weight")


@dataclass(frozen=True)
class Program:
    bits: str

    def __post_init__(self) -> None:
        check_bits(self.bits)
        if not self.bits:
            raise InvalidProgram("programs have at least one bit")

    @property
    def length(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class UtmConfig:
    step_cap: int = 10_000
    max_program_len: int = 12
    max_output_len: int = 32
    library: tuple[str, ...] = DEFAULT_LIBRARY

    def __post_init__(self) -> None:
        if self.step_cap < 0:
            raise InvalidConfig("step_cap must be non-negative")
        if not 1 <= self.max_program_len <= MAX_PROGRAM_LEN:
            raise InvalidConfig(f"max_program_len must lie in [1, {MAX_PROGRAM_LEN}]")
        if self.max_output_len < 0:
            raise InvalidConfig("max_output_len must be non-negative")
        if not self.library:
            raise InvalidConfig("the IDX library may not be empty")
        unknown = [name for name in self.library if name not in CORPUS]
        if unknown:
            raise InvalidConfig(f"unknown library samplers: {unknown}")
        object.__setattr__(self, "library", tuple(self.library))

    @property
    def enumeration_size(self) -> int:
        return 2 ** (self.max_program_len + 1) - 2

    def to_json(self) -> dict:
        return {
            "step_cap": self.step_cap,
            "max_program_len": self.max_program_len,
            "max_output_len": self.max_output_len,
            "library": list(self.library),
        }


# ---------------------------------------------------------------------------
# Integer codes
# ---------------------------------------------------------------------------


def gamma_encode(k: int) -> str:
    if k < 1:
        raise ValueError("Elias gamma codes positive integers")
    binary = format(k, "b")
    return "0" * (len(binary) - 1) + binary


def gamma0_encode(k: int) -> str:
    return gamma_encode(k + 1)


def _read_gamma0(bits: str, pc: int) -> tuple[int, int]:
    zeros = 0
    while pc + zeros < len(bits) and bits[pc + zeros] == "0":
        zeros += 1
    end = pc + 2 * zeros + 1
    if end > len(bits):
        raise InvalidProgram("truncated integer operand")
    return int(bits[pc + zeros : end], 2) - 1, end


def _width(count: int) -> int:
    return (count - 1).bit_length() if count > 1 else 0


# ---------------------------------------------------------------------------
# High sets
# ---------------------------------------------------------------------------


def high_threshold_squared(s: int, delta: int) -> Fraction:
    """Square of (99/100)·2^{−s+Δ/2}, which keeps the half-integer power exact."""

    return Fraction(99, 100) ** 2 * Fraction(2) ** (delta - 2 * s)


@lru_cache(maxsize=None)
def high_set(sampler_code: str, n: int, s: int, delta: int) -> tuple[str, ...]:
    """Lexicographic list of y with Pr[y] ≥ (99/100)·2^{−s+Δ/2} under the named sampler."""

    bound = high_threshold_squared(s, delta)
    return tuple(x for x, p in corpus_dist(sampler_code, n).items() if p * p >= bound)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


class _Run:
    __slots__ = ("bits", "cfg", "pc", "steps", "out", "out_len", "register", "loops")

    def __init__(self, bits: str, cfg: UtmConfig) -> None:
        self.bits = bits
        self.cfg = cfg
        self.pc = 0
        self.steps = 0
        self.out: list[str] = []
        self.out_len = 0
        self.register = ""
        self.loops: dict[int, int] = {}

    def tick(self, cost: int) -> None:
        self.steps += cost
        if self.steps > self.cfg.step_cap:
            raise MachineTimeout(f"step cap {self.cfg.step_cap} exhausted")

    def emit(self, chunk: str, times: int = 1) -> None:
        size = len(chunk) * times
        if self.out_len + size > self.cfg.max_output_len:
            raise InvalidProgram("output overflow")
        self.tick(size)
        self.out.append(chunk * times)
        self.out_len += size

    def operand_bit(self) -> str:
        if self.pc >= len(self.bits):
            raise InvalidProgram("missing operand bit")
        bit = self.bits[self.pc]
        self.pc += 1
        return bit

    def natural(self) -> int:
        value, self.pc = _read_gamma0(self.bits, self.pc)
        return value

    def set_register(self, value: str) -> None:
        if len(value) > self.cfg.max_output_len:
            raise InvalidProgram("register overflow")
        self.register = value

    def run(self) -> str:
        bits = self.bits
        while self.pc < len(bits):
            self.tick(1)
            start = self.pc
            if start + HEADER_BITS > len(bits):
                raise InvalidProgram("truncated opcode")
            op = bits[start : start + HEADER_BITS]
            self.pc = start + HEADER_BITS
            if op == LIT:
                self.emit(bits[self.pc :])
                break
            if op == OUT:
                self.emit(self.operand_bit())
            elif op == PUSH:
                self.set_register(self.register + self.operand_bit())
            elif op == EMIT:
                self.emit(self.register)
            elif op == REP:
                self.emit(self.register, self.natural())
            elif op == DOUBLE:
                self.set_register(self.register * 2)
                self.tick(len(self.register))
            elif op == LOOP:
                count = self.natural()
                remaining = self.loops.get(start, count)
                if remaining > 0:
                    self.loops[start] = remaining - 1
                    self.pc = 0
            else:
                self._index()
                break
        return "".join(self.out)

    def _index(self) -> None:
        code, n, s, delta = (self.natural() for _ in range(4))
        if code >= len(self.cfg.library):
            raise InvalidProgram(f"library code {code} undefined")
        if not 1 <= n <= min(IDX_MAX_N, self.cfg.max_output_len):
            raise InvalidProgram(f"IDX length {n} unsupported")
        self.tick(2**n)
        members = high_set(self.cfg.library[code], n, s, delta)
        if not members:
            raise InvalidProgram("IDX over an empty set")
        width = _width(len(members))
        if self.pc + width != len(self.bits):
            raise InvalidProgram("IDX index field has the wrong width")
        index = int(self.bits[self.pc :], 2) if width else 0
        if index >= len(members):
            raise InvalidProgram("IDX index past the end of the set")
        self.pc = len(self.bits)
        self.emit(members[index])


def execute(program: Program, cfg: UtmConfig) -> str:
    """Run ``program`` without the enumeration length guard."""

    return _Run(program.bits, cfg).run()


def run_program(program: Program, cfg: UtmConfig) -> str:
    """Output of ``program``; raises MachineTimeout or InvalidProgram."""

    if program.length > cfg.max_program_len:
        raise InvalidProgram(f"program of {program.length} bits exceeds L_max")
    return execute(program, cfg)


# ---------------------------------------------------------------------------
# Index descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IndexDescription:
    program: Program
    member: str
    high_size: int
    header_bits: int
    length_bits: int
    threshold_bits: int
    index_bits: int

    @property
    def overhead(self) -> int:
        """Everything except the index field."""

        return self.header_bits + self.length_bits + self.threshold_bits


def index_description(
    sampler_code: str, n: int, threshold: tuple[int, int], i: int, cfg: UtmConfig
) -> IndexDescription:
    """Program emitting the i-th (1-based) member of High for threshold ``(s, Δ)``."""

    s, delta = threshold
    if sampler_code not in cfg.library:
        raise InvalidConfig(f"{sampler_code!r} is not in the machine library")
    members = high_set(sampler_code, n, s, delta)
    if not 1 <= i <= len(members):
        raise IndexOutOfRange(f"index {i} outside High of size {len(members)}")
    code = gamma0_encode(cfg.library.index(sampler_code))
    length = gamma0_encode(n)
    thresh = gamma0_encode(s) + gamma0_encode(delta)
    width = _width(len(members))
    index = format(i - 1, f"0{width}b") if width else ""
    return IndexDescription(
        program=Program(IDX + code + length + thresh + index),
        member=members[i - 1],
        high_size=len(members),
        header_bits=HEADER_BITS + len(code),
        length_bits=len(length),
        threshold_bits=len(thresh),
        index_bits=width,
    )


def description_overhead(
    sampler_code: str, n: int, threshold: tuple[int, int], cfg: UtmConfig
) -> int:
    """Bits of an IDX description before its index field."""

    s, delta = threshold
    if sampler_code not in cfg.library:
        raise InvalidConfig(f"{sampler_code!r} is not in the machine library")
    fields = (cfg.library.index(sampler_code), n, s, delta)
    return HEADER_BITS + sum(len(gamma0_encode(value)) for value in fields)


def describe_all(
    sampler_code: str, n: int, threshold: tuple[int, int], cfg: UtmConfig
) -> dict[str, Program]:
    """Verified index descriptions for every member of the High set."""

    s, delta = threshold
    programs = {}
    for i in range(1, len(high_set(sampler_code, n, s, delta)) + 1):
        desc = index_description(sampler_code, n, threshold, i, cfg)
        if execute(desc.program, cfg) != desc.member:
            raise InvalidProgram(f"description {i} does not reproduce its member")
        programs[desc.member] = desc.program
    return programs


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KolmogorovOracle:
    """Minimum witnessing program length for every reachable string."""

    config: UtmConfig
    table: Mapping[str, tuple[int, str]] = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "table", MappingProxyType(dict(self.table)))

    def k_value(self, x: str) -> Optional[int]:
        """K_T(x), or None when K_T(x) exceeds L_max."""

        entry = self.table.get(x)
        return entry[0] if entry else None

    def witness(self, x: str) -> Optional[Program]:
        entry = self.table.get(x)
        return Program(entry[1]) if entry else None

    def covers(self, x: str) -> bool:
        """Whether x is guaranteed a table entry through its literal program."""

        return (
            len(x) + HEADER_BITS <= self.config.max_program_len
            and len(x) + 1 <= self.config.step_cap
            and len(x) <= self.config.max_output_len
        )

    def strings(self, n: int) -> Iterator[tuple[str, int]]:
        for x, (k, _) in self.table.items():
            if len(x) == n:
                yield x, k

    def level_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for k, _ in self.table.values():
            counts[k] = counts.get(k, 0) + 1
        return dict(sorted(counts.items()))

    def __len__(self) -> int:
        return len(self.table)


def _shards(max_len: int) -> Iterator[tuple[int, int, int]]:
    for length in range(1, max_len + 1):
        for start in range(0, 2**length, SHARD_SIZE):
            yield length, start, min(start + SHARD_SIZE, 2**length)


def _enumerate_shard(job: tuple[UtmConfig, int, int, int]) -> list[tuple[str, str]]:
    cfg, length, start, stop = job
    halting = []
    for value in range(start, stop):
        bits = format(value, f"0{length}b")
        try:
            out = _Run(bits, cfg).run()
        except (MachineTimeout, InvalidProgram):
            continue
        halting.append((out, bits))
    return halting


def build_oracle(
    cfg: UtmConfig, gate: Optional[BudgetGate] = None, workers: int = 1
) -> KolmogorovOracle:
    """Enumerate every program by length then lexicographically; keep first witnesses."""

    if cfg.step_cap < 1:
        raise InvalidConfig("building an oracle needs step_cap >= 1")
    (gate or BudgetGate()).require("oracle build", cfg.enumeration_size)
    jobs = [(cfg, *shard) for shard in _shards(cfg.max_program_len)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results: Sequence[list[tuple[str, str]]] = list(pool.map(_enumerate_shard, jobs))
    else:
        results = [_enumerate_shard(job) for job in jobs]
    table: dict[str, tuple[int, str]] = {}
    for halting in results:
        for out, bits in halting:
            if out not in table:
                table[out] = (len(bits), bits)
    _LOGGER.debug(
        "oracle over L_max=%d, step_cap=%d holds %d strings",
        cfg.max_program_len,
        cfg.step_cap,
        len(table),
    )
    return KolmogorovOracle(cfg, table)


def count_low_complexity(oracle: KolmogorovOracle, n: int, s: int) -> int:
    """|{x in {0,1}^n : K_T(x) <= s}|."""

    if s > oracle.config.max_program_len:
        raise OracleMiss(f"threshold {s} above L_max={oracle.config.max_program_len}")
    return sum(1 for _, k in oracle.strings(n) if k <= s)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def _pack_bits(bits: str) -> bytes:
    size = (len(bits) + 7) // 8
    value = int(bits, 2) << (size * 8 - len(bits)) if bits else 0
    return struct.pack(">H", len(bits)) + value.to_bytes(size, "big")


def _unpack_bits(blob: bytes, offset: int) -> tuple[str, int]:
    (length,) = struct.unpack_from(">H", blob, offset)
    offset += 2
    size = (length + 7) // 8
    value = int.from_bytes(blob[offset : offset + size], "big") >> (size * 8 - length)
    bits = format(value, f"0{length}b") if length else ""
    return bits, offset + size


def _hex_bits(bits: str) -> str:
    return f"{len(bits)}:{_pack_bits(bits)[2:].hex()}"


def _ordered(oracle: KolmogorovOracle) -> list[tuple[str, int, str]]:
    return sorted(((x, k, w) for x, (k, w) in oracle.table.items()), key=lambda r: (len(r[0]), r[0]))


def save_oracle(oracle: KolmogorovOracle, path: Path) -> Path:
    cfg = oracle.config
    library = json.dumps(list(cfg.library)).encode("utf-8")
    chunks = [
        MAGIC,
        struct.pack(">IHH", cfg.step_cap, cfg.max_program_len, cfg.max_output_len),
        struct.pack(">H", len(library)),
        library,
        struct.pack(">I", len(oracle.table)),
    ]
    for x, k, witness in _ordered(oracle):
        chunks += [_pack_bits(x), struct.pack(">H", k), _pack_bits(witness)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(chunks))
    return path


def load_oracle(path: Path) -> KolmogorovOracle:
    blob = Path(path).read_bytes()
    if blob[:4] != MAGIC:
        raise ValueError(f"{path} is not a KTO1 oracle file")
    step_cap, max_len, max_out = struct.unpack_from(">IHH", blob, 4)
    (lib_len,) = struct.unpack_from(">H", blob, 12)
    library = tuple(json.loads(blob[14 : 14 + lib_len].decode("utf-8")))
    offset = 14 + lib_len
    (count,) = struct.unpack_from(">I", blob, offset)
    offset += 4
    table = {}
    for _ in range(count):
        x, offset = _unpack_bits(blob, offset)
        (k,) = struct.unpack_from(">H", blob, offset)
        witness, offset = _unpack_bits(blob, offset + 2)
        table[x] = (k, witness)
    return KolmogorovOracle(UtmConfig(step_cap, max_len, max_out, library), table)


def export_csv(oracle: KolmogorovOracle, path: Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["x_hex", "k", "witness_hex"])
        for x, k, witness in _ordered(oracle):
            writer.writerow([_hex_bits(x), k, _hex_bits(witness)])
    return path
