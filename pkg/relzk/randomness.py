"""
Pre-shared prover randomness
Per-node static trits read through cyclic windows, per-round colour permutations and
common vectors, the independence check on windows, budgeting, and the RZK1 file format.
"""

import itertools
import logging
import math
import struct
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from relzk.config import get_settings
from relzk.errors import ConstructionError, ContractViolation, SharedRandomnessFormatError
from relzk.field import galois_field
from relzk.graph import Colouring, Graph

logger = logging.getLogger(__name__)

Selector = Tuple[int, int]

ALL_SELECTORS: Tuple[Selector, ...] = tuple((bit, trit) for bit in (0, 1) for trit in (0, 1, 2))


@dataclass(frozen=True)
class TritVector:
    trits: Tuple[int, ...]

    def __post_init__(self):
        if not self.trits:
            raise ContractViolation("trit vector must not be empty")
        for t in self.trits:
            if t not in (0, 1, 2):
                raise ContractViolation(f"trits must be in {{0,1,2}}, got {t}")

    @classmethod
    def of(cls, values) -> "TritVector":
        return cls(tuple(int(v) for v in values))

    @property
    def length(self) -> int:
        return len(self.trits)

    def as_array(self) -> np.ndarray:
        return np.array(self.trits, dtype=np.int64)


def gf3_add(a: int, b: int) -> int:
    return (a + b) % 3


def gf3_mul(a: int, b: int) -> int:
    return (a * b) % 3


def gf3_dot(u: TritVector, v: TritVector) -> int:
    if u.length != v.length:
        raise ContractViolation(f"length mismatch: {u.length} vs {v.length}")
    return int(np.dot(u.as_array(), v.as_array()) % 3)


def base3_digits(value: int) -> int:
    if value < 1:
        raise ContractViolation(f"value must be positive, got {value}")
    digits = 0
    while value:
        value //= 3
        digits += 1
    return digits


def window_length(num_vertices: int) -> int:
    return 2 * base3_digits(num_vertices) + 1


@dataclass(frozen=True, eq=False)
class NodeSequence:
    """
    Static shared trits. Vertex v reads the window of window_length trits starting
    at node_offset[v], wrapping around the end of the sequence.
    """

    trits: np.ndarray
    window_length: int
    node_offset: np.ndarray
    construction: str = "cyclic-code"

    @property
    def num_vertices(self) -> int:
        return int(self.node_offset.shape[0])

    @property
    def length(self) -> int:
        return int(self.trits.shape[0])

    @cached_property
    def windows(self) -> np.ndarray:
        """(|V|, window_length) int8 matrix of every vertex window"""
        steps = np.arange(self.window_length, dtype=np.int64)
        positions = (self.node_offset[:, None] + steps[None, :]) % self.length
        matrix = self.trits[positions].astype(np.int8)
        matrix.setflags(write=False)
        return matrix

    def window(self, vertex: int) -> TritVector:
        if not 0 <= vertex < self.num_vertices:
            raise ContractViolation(f"vertex {vertex} out of range for |V|={self.num_vertices}")
        return TritVector.of(self.windows[vertex])

    def rotated(self) -> "NodeSequence":
        """Same windows, stored so that vertex v starts at position v"""
        if not np.array_equal(self.node_offset, (self.node_offset[0] + np.arange(self.num_vertices)) % self.length):
            raise ContractViolation("node offsets are not consecutive")
        trits = np.roll(self.trits, -int(self.node_offset[0]))
        return NodeSequence(_frozen(trits), self.window_length, _frozen(np.arange(self.num_vertices, dtype=np.int64)), self.construction)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def cyclic_code_sequence(m: int, rng: np.random.Generator) -> np.ndarray:
    """
    Length 3^m - 1 sequence g0 + Tr(g1 a^k) + Tr(g2 a^2k): a codeword of the dual of the
    cyclic code with zeros {1, a, a^2, a^3, ...}, so any 4 windows of 2m+1 trits are
    linearly independent.
    """
    gf = galois_field(m)
    n = gf.order
    g0 = int(rng.integers(1, 3))
    g1 = int(rng.integers(n))
    g2 = int(rng.integers(n))
    k = np.arange(n, dtype=np.int64)
    trace = gf.traces.astype(np.int64)
    return ((g0 + trace[(g1 + k) % n] + trace[(g2 + 2 * k) % n]) % 3).astype(np.int8)


def build_node_sequence(
    num_vertices: int,
    rng: np.random.Generator,
    random_offset: bool = True,
    graph: Optional[Graph] = None,
) -> NodeSequence:
    """Sequence whose node windows pass verify_window_independence, against graph when given"""
    if num_vertices < 1:
        raise ContractViolation(f"need at least one vertex, got {num_vertices}")
    if graph is not None and graph.num_vertices != num_vertices:
        raise ContractViolation(f"graph has {graph.num_vertices} vertices, sequence asked for {num_vertices}")
    m = base3_digits(num_vertices)
    length = window_length(num_vertices)
    retries = get_settings().construction_retries

    if m >= 2:
        trits = cyclic_code_sequence(m, rng)
        n = trits.shape[0]
        offset = int(rng.integers(n)) if random_offset else 0
        positions = (offset + np.arange(num_vertices, dtype=np.int64)) % n
        seq = NodeSequence(_frozen(trits), length, _frozen(positions), "cyclic-code")
        report = verify_window_independence(seq, graph, rng=rng)
        if report.passed:
            logger.info(f"Node sequence: |V|={num_vertices} n={n} window={length} via cyclic code")
            return seq
        logger.warning(f"Cyclic-code sequence failed independence at {report.first_failure}; falling back")

    # Small |V| or fallback: random sequences checked exhaustively
    n = max(num_vertices, 2)
    while n % 3 == 0:
        n += 1
    for attempt in range(retries):
        trits = rng.integers(0, 3, size=n).astype(np.int8)
        seq = NodeSequence(_frozen(trits), length, _frozen(np.arange(num_vertices, dtype=np.int64)), "rejection")
        report = verify_window_independence(seq, graph, rng=rng)
        if report.passed:
            logger.info(f"Node sequence: |V|={num_vertices} n={n} window={length} after {attempt + 1} draws")
            return seq
    raise ConstructionError(
        "no sequence with independent windows found",
        num_vertices=num_vertices,
        sequence_length=n,
        window_length=length,
        retries=retries,
    )


@dataclass(frozen=True)
class IndependenceReport:
    passed: bool
    subsets_checked: int
    exhaustive: bool
    first_failure: Optional[Tuple[int, ...]] = None


@lru_cache(maxsize=8)
def _nonzero_combinations(size: int) -> np.ndarray:
    combos = np.array(list(itertools.product(range(3), repeat=size)), dtype=np.int16)
    return combos[1:]


def _first_dependent(windows: np.ndarray, subsets: np.ndarray, chunk: int = 2048) -> Optional[int]:
    """Index of the first row of subsets whose windows are linearly dependent"""
    if subsets.shape[0] == 0:
        return None
    combos = _nonzero_combinations(subsets.shape[1])
    matrix = windows.astype(np.int16)
    for start in range(0, subsets.shape[0], chunk):
        block = matrix[subsets[start:start + chunk]]
        sums = np.einsum("ck,skl->scl", combos, block) % 3
        dependent = np.any(np.all(sums == 0, axis=2), axis=1)
        if dependent.any():
            return start + int(np.argmax(dependent))
    return None


def co_occurring_subsets(graph: Graph) -> np.ndarray:
    """Vertex triples {i, j, j'} read in one round: two edges sharing vertex i"""
    triples = set()
    for v in range(graph.num_vertices):
        neigh = graph.neighbours(v)
        for a in range(len(neigh)):
            for b in range(a + 1, len(neigh)):
                triples.add(tuple(sorted((v, neigh[a], neigh[b]))))
    return np.array(sorted(triples), dtype=np.int64).reshape(-1, 3)


def _sample_subsets(num_vertices: int, count: int, rng: np.random.Generator) -> np.ndarray:
    subsets = np.empty((0, 4), dtype=np.int64)
    while subsets.shape[0] < count:
        draw = rng.integers(num_vertices, size=(count, 4))
        ordered = np.sort(draw, axis=1)
        distinct = np.all(ordered[:, 1:] != ordered[:, :-1], axis=1)
        subsets = np.concatenate([subsets, draw[distinct]])
    return subsets[:count]


def verify_window_independence(
    seq: NodeSequence,
    graph: Optional[Graph] = None,
    rng: Optional[np.random.Generator] = None,
    samples: Optional[int] = None,
    exhaustive_limit: Optional[int] = None,
) -> IndependenceReport:
    """
    GF(3)-rank check of node windows. Every 4-subset when there are at most
    exhaustive_limit of them, otherwise sampled 4-subsets plus, given a graph,
    every triple of windows that one round reads together.
    """
    settings = get_settings()
    samples = samples if samples is not None else settings.independence_samples
    exhaustive_limit = exhaustive_limit if exhaustive_limit is not None else settings.exhaustive_subset_limit
    windows = seq.windows
    n = seq.num_vertices
    size = min(4, n)

    if math.comb(n, size) <= exhaustive_limit:
        flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), size)), dtype=np.int64)
        subsets = flat.reshape(-1, size)
        exhaustive = True
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        subsets = _sample_subsets(n, samples, rng)
        exhaustive = False

    checked = subsets.shape[0]
    failed = _first_dependent(windows, subsets)
    if failed is not None:
        return IndependenceReport(False, failed + 1, exhaustive, tuple(int(v) for v in subsets[failed]))

    if graph is not None and not exhaustive:
        triples = co_occurring_subsets(graph)
        checked += triples.shape[0]
        failed = _first_dependent(windows, triples)
        if failed is not None:
            return IndependenceReport(False, checked, exhaustive, tuple(int(v) for v in triples[failed]))

    logger.debug(f"Window independence: {checked} subsets checked, exhaustive={exhaustive}")
    return IndependenceReport(True, checked, exhaustive)


@dataclass(frozen=True)
class RoundRandomness:
    perm_selector: Selector
    common_vector: TritVector

    def __post_init__(self):
        bit, trit = self.perm_selector
        if bit not in (0, 1) or trit not in (0, 1, 2):
            raise ContractViolation(f"invalid permutation selector {self.perm_selector}")


@dataclass(frozen=True, eq=False)
class RandomnessBlock:
    """Consecutive rounds of shared randomness as arrays"""

    first_round: int
    perm_bits: np.ndarray
    perm_trits: np.ndarray
    common_vectors: np.ndarray

    def __len__(self) -> int:
        return int(self.perm_bits.shape[0])

    def round(self, offset: int) -> RoundRandomness:
        return RoundRandomness(
            (int(self.perm_bits[offset]), int(self.perm_trits[offset])),
            TritVector.of(self.common_vectors[offset]),
        )


class RoundRandomnessSource:
    """Deterministic stream of per-round shared randomness; equal seeds give equal streams"""

    def __init__(self, seed, window_length: int):
        self.window_length = window_length
        self._rng = np.random.default_rng(seed)
        self._next_round = 0

    def next_block(self, count: int) -> RandomnessBlock:
        block = RandomnessBlock(
            first_round=self._next_round,
            perm_bits=self._rng.integers(0, 2, size=count, dtype=np.int64),
            perm_trits=self._rng.integers(0, 3, size=count, dtype=np.int64),
            common_vectors=self._rng.integers(0, 3, size=(count, self.window_length), dtype=np.int64),
        )
        self._next_round += count
        return block

    def next_round(self) -> RoundRandomness:
        return self.next_block(1).round(0)


def permute_colours(colours: np.ndarray, bits: np.ndarray, trits: np.ndarray) -> np.ndarray:
    """Vectorised colour permutation c -> (+/-c + trit) mod 3"""
    sign = 1 - 2 * np.asarray(bits, dtype=np.int64)
    return (sign * np.asarray(colours, dtype=np.int64) + trits) % 3


def permuted_colouring(base: Colouring, perm_selector: Selector) -> Colouring:
    bit, trit = perm_selector
    if (bit, trit) not in ALL_SELECTORS:
        raise ContractViolation(f"invalid permutation selector {perm_selector}")
    return Colouring.from_sequence(permute_colours(base.as_array(), bit, trit))


def expand_randomiser(seq: NodeSequence, vertex: int, rr: RoundRandomness) -> int:
    """b_vertex for the round: window of vertex dotted with the common vector"""
    return gf3_dot(seq.window(vertex), rr.common_vector)


def expand_randomisers(seq: NodeSequence, vertices: np.ndarray, common_vectors: np.ndarray) -> np.ndarray:
    """Row-wise b for a block: vertices (B,) against common_vectors (B, L)"""
    windows = seq.windows.astype(np.int64)[vertices]
    return np.einsum("bl,bl->b", windows, common_vectors) % 3


@dataclass(frozen=True)
class RandomnessBudget:
    num_vertices: int
    rounds: int
    window_length: int
    sequence_trits: int
    static_trits: int
    per_round_bits: int
    per_round_trits: int
    total_bits: int
    total_trits: int
    naive_per_round_trits: int
    naive_total_trits: int


def randomness_budget(num_vertices: int, rounds: int) -> RandomnessBudget:
    if rounds < 0:
        raise ContractViolation(f"rounds must be >= 0, got {rounds}")
    m = base3_digits(num_vertices)
    length = 2 * m + 1
    per_round_trits = 1 + length
    return RandomnessBudget(
        num_vertices=num_vertices,
        rounds=rounds,
        window_length=length,
        sequence_trits=3 ** m - 1 if m >= 2 else num_vertices,
        static_trits=num_vertices,
        per_round_bits=1,
        per_round_trits=per_round_trits,
        total_bits=rounds,
        total_trits=num_vertices + rounds * per_round_trits,
        naive_per_round_trits=num_vertices,
        naive_total_trits=rounds * num_vertices,
    )


# RZK1 pre-shared randomness file

RZK1_MAGIC = b"RZK1"
RZK1_HEADER = struct.Struct("<4sIIIIQ")
_TRIT_WEIGHTS = np.array([81, 27, 9, 3, 1], dtype=np.int64)


def pack_trits(trits: np.ndarray) -> bytes:
    """Five trits per byte, first trit most significant; last group zero-padded"""
    values = np.asarray(trits, dtype=np.int64)
    padded = np.zeros(-(-values.shape[0] // 5) * 5, dtype=np.int64)
    padded[: values.shape[0]] = values
    return (padded.reshape(-1, 5) @ _TRIT_WEIGHTS).astype(np.uint8).tobytes()


def unpack_trits(data: bytes, count: int) -> np.ndarray:
    raw = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
    if np.any(raw > 242):
        raise SharedRandomnessFormatError("byte value above 242 is not a packed trit group")
    digits = (raw[:, None] // _TRIT_WEIGHTS[None, :]) % 3
    flat = digits.reshape(-1)
    if flat.shape[0] < count:
        raise SharedRandomnessFormatError(f"expected {count} trits, file holds {flat.shape[0]}")
    if np.any(flat[count:]):
        raise SharedRandomnessFormatError("nonzero padding after the last trit")
    return flat[:count]


@dataclass(frozen=True, eq=False)
class SharedRandomness:
    sequence: NodeSequence
    seed: int
    rounds: RandomnessBlock


def write_shared_randomness(path: Union[str, Path], seq: NodeSequence, seed: int, round_count: int, round_seed=None) -> int:
    """Write the static sequence and round_count rounds; returns bytes written"""
    seq = seq.rotated()
    source = RoundRandomnessSource(round_seed if round_seed is not None else seed, seq.window_length)
    block = source.next_block(round_count)
    per_round = np.concatenate(
        [block.perm_bits[:, None], block.perm_trits[:, None], block.common_vectors], axis=1
    ).reshape(-1)
    payload = pack_trits(np.concatenate([seq.trits.astype(np.int64), per_round]))
    header = RZK1_HEADER.pack(RZK1_MAGIC, seq.num_vertices, seq.length, seq.window_length, round_count, seed)
    with open(path, "wb") as handle:
        handle.write(header)
        handle.write(payload)
    logger.info(f"Wrote {len(header) + len(payload)} bytes of shared randomness to {path}")
    return len(header) + len(payload)


def read_shared_randomness(path: Union[str, Path]) -> SharedRandomness:
    data = Path(path).read_bytes()
    if len(data) < RZK1_HEADER.size:
        raise SharedRandomnessFormatError("file shorter than the RZK1 header")
    magic, num_vertices, n, length, round_count, seed = RZK1_HEADER.unpack_from(data)
    if magic != RZK1_MAGIC:
        raise SharedRandomnessFormatError(f"bad magic {magic!r}")
    if num_vertices < 1 or n < num_vertices or length != window_length(num_vertices):
        raise SharedRandomnessFormatError(f"inconsistent header |V|={num_vertices} n={n} window={length}")

    per_round = 2 + length
    count = n + round_count * per_round
    if len(data) - RZK1_HEADER.size != -(-count // 5):
        raise SharedRandomnessFormatError(f"payload size does not match {count} trits")
    trits = unpack_trits(data[RZK1_HEADER.size:], count)

    rounds = trits[n:].reshape(round_count, per_round)
    if np.any(rounds[:, 0] > 1):
        raise SharedRandomnessFormatError("permutation bit out of range")
    sequence = NodeSequence(
        _frozen(trits[:n].astype(np.int8)),
        length,
        _frozen(np.arange(num_vertices, dtype=np.int64)),
        "file",
    )
    block = RandomnessBlock(0, rounds[:, 0].copy(), rounds[:, 1].copy(), rounds[:, 2:].copy())
    return SharedRandomness(sequence, seed, block)
