"""
Two-prover round protocol
Verifier challenge sampling, honest prover answers, the colour and consistency tests,
and the block-wise session loop that exchanges wire frames with both provers.
"""

import enum
import logging
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Optional, Protocol, Tuple

import numpy as np

from relzk.config import get_settings
from relzk.errors import ContractViolation, FrameError, ProtocolAbort
from relzk.graph import Colouring, Graph
from relzk.randomness import (
    NodeSequence,
    RoundRandomness,
    RoundRandomnessSource,
    build_node_sequence,
    expand_randomiser,
    expand_randomisers,
    permute_colours,
    permuted_colouring,
)
from relzk.transcript import TranscriptBlock
from relzk.wire import challenge_fields, decode_answers, decode_challenges, encode_answers, encode_challenges

logger = logging.getLogger(__name__)


class Mode(enum.IntEnum):
    COLOUR_TEST = 0
    CONSIST_FIRST = 1
    CONSIST_SECOND = 2


class Reason(enum.IntEnum):
    COLOUR_OK = 0
    COLOUR_FAIL = 1
    CONSIST_OK = 2
    CONSIST_FAIL = 3


# rng.integers(0, 5) outcome -> mode, giving weights 1/5, 2/5, 2/5
MODE_TABLE = np.array([Mode.COLOUR_TEST, Mode.CONSIST_FIRST, Mode.CONSIST_FIRST, Mode.CONSIST_SECOND, Mode.CONSIST_SECOND], dtype=np.int64)


@dataclass(frozen=True)
class Challenge:
    round: int
    edge: Tuple[int, int]
    r: int
    s: int

    def validate(self, g: Graph) -> None:
        if self.r not in (1, 2) or self.s not in (1, 2):
            raise ContractViolation(f"randomisers must be in {{1,2}}, got r={self.r} s={self.s}")
        g.edge_id(self.edge)


@dataclass(frozen=True)
class Answer:
    a1: int
    a2: int

    def __post_init__(self):
        if self.a1 not in (0, 1, 2) or self.a2 not in (0, 1, 2):
            raise ContractViolation(f"answer trits must be in {{0,1,2}}, got ({self.a1}, {self.a2})")


@dataclass(frozen=True)
class ChallengePair:
    left: Challenge
    right: Challenge
    mode: Mode


@dataclass(frozen=True)
class RoundVerdict:
    accepted: bool
    mode: Mode
    reason: Reason


def required_rounds(num_edges: int, k: int) -> int:
    if num_edges < 1 or k < 1:
        raise ContractViolation(f"num_edges and k must be positive, got {num_edges}, {k}")
    return 9 * num_edges * k


def challenge_index(edge_id, swapped, r, s):
    """Position of an oriented challenge in a per-side answer table; works on arrays"""
    return (edge_id * 2 + swapped) * 4 + (r - 1) * 2 + (s - 1)


@dataclass(frozen=True, eq=False)
class ChallengeBatch:
    """Consecutive rounds of challenge pairs as parallel arrays"""

    rounds: np.ndarray
    modes: np.ndarray
    left_edge: np.ndarray
    left_swap: np.ndarray
    left_r: np.ndarray
    left_s: np.ndarray
    right_edge: np.ndarray
    right_swap: np.ndarray
    right_r: np.ndarray
    right_s: np.ndarray
    right_slot: np.ndarray

    def __len__(self) -> int:
        return int(self.rounds.shape[0])

    def left_frames(self) -> bytes:
        return encode_challenges(self.rounds, self.left_edge, self.left_swap, self.left_r, self.left_s)

    def right_frames(self) -> bytes:
        return encode_challenges(self.rounds, self.right_edge, self.right_swap, self.right_r, self.right_s)

    def endpoints(self, g: Graph) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Oriented (i, j) on the left and (i', j') on the right"""
        edges = g.edge_array
        return (
            edges[self.left_edge, self.left_swap],
            edges[self.left_edge, 1 - self.left_swap],
            edges[self.right_edge, self.right_swap],
            edges[self.right_edge, 1 - self.right_swap],
        )

    def pair(self, g: Graph, offset: int) -> ChallengePair:
        li, lj, ri, rj = (int(a[offset]) for a in self.endpoints(g))
        n = int(self.rounds[offset])
        return ChallengePair(
            left=Challenge(n, (li, lj), int(self.left_r[offset]), int(self.left_s[offset])),
            right=Challenge(n, (ri, rj), int(self.right_r[offset]), int(self.right_s[offset])),
            mode=Mode(int(self.modes[offset])),
        )


def _incidence_arrays(g: Graph) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    degrees = np.array([g.degree(v) for v in range(g.num_vertices)], dtype=np.int64)
    pointers = np.concatenate([[0], np.cumsum(degrees)[:-1]]).astype(np.int64)
    flat = np.array([e for v in range(g.num_vertices) for e in g.incident_edges(v)], dtype=np.int64)
    return degrees, pointers, flat


def sample_challenge_batch(g: Graph, rng: np.random.Generator, count: int, first_round: int = 0) -> ChallengeBatch:
    """
    Left challenge uniform over oriented edges and randomisers. In the consistency
    modes the right edge is uniform among the edges at the shared vertex, which lands
    in a uniformly random right slot carrying the left's randomiser for that vertex.
    """
    if g.num_edges < 1:
        raise ContractViolation("graph has no edges to ask about")
    edges = g.edge_array
    degrees, pointers, incident = _incidence_arrays(g)

    left_edge = rng.integers(g.num_edges, size=count)
    left_swap = rng.integers(2, size=count)
    left_r = rng.integers(1, 3, size=count)
    left_s = rng.integers(1, 3, size=count)
    modes = MODE_TABLE[rng.integers(5, size=count)]
    pick = rng.random(size=count)
    free = rng.integers(1, 3, size=count)
    slot = rng.integers(2, size=count)

    first = edges[left_edge, left_swap]
    second = edges[left_edge, 1 - left_swap]
    second_mode = modes == Mode.CONSIST_SECOND
    shared = np.where(second_mode, second, first)
    offsets = np.minimum((pick * degrees[shared]).astype(np.int64), degrees[shared] - 1)
    drawn = incident[pointers[shared] + offsets]
    drawn_swap = np.where(slot == 0, edges[drawn, 0] != shared, edges[drawn, 1] != shared).astype(np.int64)
    constrained = np.where(second_mode, left_s, left_r)

    colour = modes == Mode.COLOUR_TEST
    right_edge = np.where(colour, left_edge, drawn)
    right_swap = np.where(colour, left_swap, drawn_swap)
    right_r = np.where(colour, 3 - left_r, np.where(slot == 0, constrained, free))
    right_s = np.where(colour, 3 - left_s, np.where(slot == 1, constrained, free))
    right_slot = np.where(colour, 0, slot)

    return ChallengeBatch(
        rounds=np.arange(first_round, first_round + count, dtype=np.int64),
        modes=modes,
        left_edge=left_edge,
        left_swap=left_swap,
        left_r=left_r,
        left_s=left_s,
        right_edge=right_edge,
        right_swap=right_swap,
        right_r=right_r,
        right_s=right_s,
        right_slot=right_slot,
    )


def sample_challenge_pair(g: Graph, rng: np.random.Generator, round_index: int = 0) -> ChallengePair:
    return sample_challenge_batch(g, rng, 1, round_index).pair(g, 0)


def prover_answer(ch: Challenge, colouring: Colouring, seq: NodeSequence, rr: RoundRandomness) -> Answer:
    """a1 = b_i*r + c_i, a2 = b_j*s + c_j (mod 3) under the round's colour permutation"""
    colours = permuted_colouring(colouring, rr.perm_selector).colours
    i, j = ch.edge
    b_i = expand_randomiser(seq, i, rr)
    b_j = expand_randomiser(seq, j, rr)
    return Answer((b_i * ch.r + colours[i]) % 3, (b_j * ch.s + colours[j]) % 3)


def check_colour_test(left: Answer, right: Answer) -> RoundVerdict:
    accepted = (left.a1 + right.a1) % 3 != (left.a2 + right.a2) % 3
    return RoundVerdict(accepted, Mode.COLOUR_TEST, Reason.COLOUR_OK if accepted else Reason.COLOUR_FAIL)


def shared_slot(pair: ChallengePair) -> int:
    """Slot of the right challenge holding the vertex the consistency test compares"""
    vertex = pair.left.edge[0] if pair.mode == Mode.CONSIST_FIRST else pair.left.edge[1]
    if vertex not in pair.right.edge:
        raise ContractViolation(f"right edge {pair.right.edge} does not contain shared vertex {vertex}")
    return pair.right.edge.index(vertex)


def check_consistency(pair: ChallengePair, left: Answer, right: Answer) -> RoundVerdict:
    """Compare both provers' answers for the shared vertex"""
    if pair.mode == Mode.CONSIST_FIRST:
        mine = left.a1
    elif pair.mode == Mode.CONSIST_SECOND:
        mine = left.a2
    else:
        raise ContractViolation(f"consistency check called for mode {pair.mode.name}")
    theirs = right.a1 if shared_slot(pair) == 0 else right.a2
    accepted = mine == theirs
    return RoundVerdict(accepted, pair.mode, Reason.CONSIST_OK if accepted else Reason.CONSIST_FAIL)


def judge(pair: ChallengePair, left: Answer, right: Answer) -> RoundVerdict:
    if pair.mode == Mode.COLOUR_TEST:
        return check_colour_test(left, right)
    return check_consistency(pair, left, right)


def judge_batch(modes: np.ndarray, right_slots: np.ndarray, left_a1, left_a2, right_a1, right_a2) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised verdicts: (accepted bool array, Reason codes)"""
    colour_ok = (left_a1 + right_a1) % 3 != (left_a2 + right_a2) % 3
    mine = np.where(modes == Mode.CONSIST_SECOND, left_a2, left_a1)
    theirs = np.where(right_slots == 1, right_a2, right_a1)
    accepted = np.where(modes == Mode.COLOUR_TEST, colour_ok, mine == theirs)
    reasons = np.where(
        modes == Mode.COLOUR_TEST,
        np.where(accepted, Reason.COLOUR_OK, Reason.COLOUR_FAIL),
        np.where(accepted, Reason.CONSIST_OK, Reason.CONSIST_FAIL),
    )
    return accepted, reasons.astype(np.int64)


class FrameProver(Protocol):
    """Anything that turns a block of challenge frames into a block of answer frames"""

    def answer_frames(self, frames: bytes) -> bytes:
        ...


class HonestProver:
    """One prover holding the certificate and the pre-shared randomness"""

    def __init__(self, graph: Graph, colouring: Colouring, sequence: NodeSequence, shared_seed):
        if len(colouring) != graph.num_vertices:
            raise ContractViolation(f"colouring has length {len(colouring)}, graph has {graph.num_vertices} vertices")
        if sequence.num_vertices != graph.num_vertices:
            raise ContractViolation("node sequence does not match the graph")
        self.graph = graph
        self.colours = colouring.as_array()
        self.sequence = sequence
        self.randomness = RoundRandomnessSource(shared_seed, sequence.window_length)
        self.next_round = 0

    def answer_frames(self, frames: bytes) -> bytes:
        rounds, edge_ids, swapped, r, s = challenge_fields(decode_challenges(frames))
        count = rounds.shape[0]
        if count == 0:
            return b""
        if np.any(rounds != np.arange(self.next_round, self.next_round + count)):
            raise FrameError(f"expected rounds from {self.next_round}, got {int(rounds[0])}")
        if edge_ids.max() >= self.graph.num_edges:
            raise FrameError(f"edge id {int(edge_ids.max())} out of range")

        block = self.randomness.next_block(count)
        self.next_round += count
        edges = self.graph.edge_array
        i = edges[edge_ids, swapped]
        j = edges[edge_ids, 1 - swapped]
        b_i = expand_randomisers(self.sequence, i, block.common_vectors)
        b_j = expand_randomisers(self.sequence, j, block.common_vectors)
        c_i = permute_colours(self.colours[i], block.perm_bits, block.perm_trits)
        c_j = permute_colours(self.colours[j], block.perm_bits, block.perm_trits)
        return encode_answers(rounds, (b_i * r + c_i) % 3, (b_j * s + c_j) % 3)


class Timeline(Protocol):
    def stamps(self, first_round: int, count: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        ...


class UntimedTimeline:
    """All timestamps zero"""

    def stamps(self, first_round: int, count: int):
        zeros = np.zeros(count, dtype=np.int64)
        return zeros, zeros, zeros, zeros


@dataclass
class SessionConfig:
    graph: Graph
    colouring: Optional[Colouring] = None
    security_k: int = 1
    seed: int = 0
    rounds: Optional[int] = None
    abort_on_first_failure: bool = True

    @property
    def rounds_to_run(self) -> int:
        if self.rounds is not None:
            if self.rounds < 0:
                raise ContractViolation(f"rounds must be >= 0, got {self.rounds}")
            return self.rounds
        return required_rounds(self.graph.num_edges, self.security_k)


@dataclass(frozen=True)
class SessionStreams:
    verifier: np.random.SeedSequence
    sequence: np.random.SeedSequence
    shared: np.random.SeedSequence
    timing: np.random.SeedSequence


def session_streams(seed: int) -> SessionStreams:
    verifier, sequence, shared, timing = np.random.SeedSequence(seed).spawn(4)
    return SessionStreams(verifier, sequence, shared, timing)


def honest_provers(cfg: SessionConfig, right_seed: Optional[int] = None) -> Tuple[HonestProver, HonestProver]:
    """Both provers from the session seed; right_seed gives the right prover different round randomness"""
    if cfg.colouring is None:
        raise ContractViolation("no certificate: provers need a colouring")
    streams = session_streams(cfg.seed)
    sequence = build_node_sequence(cfg.graph.num_vertices, np.random.default_rng(streams.sequence), graph=cfg.graph)
    left = HonestProver(cfg.graph, cfg.colouring, sequence, streams.shared)
    right_shared = streams.shared if right_seed is None else session_streams(right_seed).shared
    right = HonestProver(cfg.graph, cfg.colouring, sequence, right_shared)
    return left, right


@dataclass
class SessionResult:
    rounds_planned: int
    rounds_run: int = 0
    failures: int = 0
    reasons: Dict[str, int] = field(default_factory=dict)
    modes: Dict[str, int] = field(default_factory=dict)
    duration_s: float = 0.0
    aborted: bool = False
    first_failure_round: Optional[int] = None

    @property
    def rounds_per_second(self) -> float:
        if self.duration_s <= 0:
            return 0.0
        return self.rounds_run / self.duration_s

    @property
    def pass_rate(self) -> float:
        if self.rounds_run == 0:
            return 1.0
        return 1.0 - self.failures / self.rounds_run


def _collect_answers(payload: bytes, rounds: np.ndarray, side: str) -> Tuple[np.ndarray, np.ndarray]:
    try:
        frames = decode_answers(payload)
    except FrameError as e:
        raise ProtocolAbort(f"{side} prover sent malformed frames: {e}", int(rounds[0]))
    received = frames["round"].astype(np.int64)
    values = frames["answer"].astype(np.int64)
    count = min(received.shape[0], rounds.shape[0])
    bad = np.flatnonzero((received[:count] != rounds[:count]) | (values[:count] > 8))
    if bad.size:
        raise ProtocolAbort(f"{side} prover answer malformed", int(rounds[bad[0]]))
    if received.shape[0] < rounds.shape[0]:
        raise ProtocolAbort(f"{side} prover answer missing", int(rounds[received.shape[0]]))
    if received.shape[0] > rounds.shape[0]:
        raise ProtocolAbort(f"{side} prover sent unrequested answers", int(rounds[-1]))
    return values % 3, values // 3


def run_session(
    cfg: SessionConfig,
    prover_left: FrameProver,
    prover_right: FrameProver,
    transcript_sink=None,
    timeline: Optional[Timeline] = None,
    block_size: Optional[int] = None,
) -> SessionResult:
    """Run the configured number of rounds block by block; each prover only sees its own frames"""
    total = cfg.rounds_to_run
    block_size = block_size or get_settings().block_size
    timeline = timeline or UntimedTimeline()
    verifier_rng = np.random.default_rng(session_streams(cfg.seed).verifier)
    graph = cfg.graph

    result = SessionResult(rounds_planned=total)
    reasons: Counter = Counter()
    modes: Counter = Counter()
    started = time.perf_counter()

    for start in range(0, total, block_size):
        count = min(block_size, total - start)
        batch = sample_challenge_batch(graph, verifier_rng, count, start)
        left_a1, left_a2 = _collect_answers(prover_left.answer_frames(batch.left_frames()), batch.rounds, "left")
        right_a1, right_a2 = _collect_answers(prover_right.answer_frames(batch.right_frames()), batch.rounds, "right")
        accepted, reason_codes = judge_batch(batch.modes, batch.right_slot, left_a1, left_a2, right_a1, right_a2)
        emit_l, recv_l, emit_r, recv_r = timeline.stamps(start, count)

        cut = count
        failed = np.flatnonzero(~accepted)
        if failed.size and result.first_failure_round is None:
            result.first_failure_round = start + int(failed[0])
        if failed.size and cfg.abort_on_first_failure:
            cut = int(failed[0]) + 1
            result.aborted = True

        if transcript_sink is not None:
            li, lj, ri, rj = batch.endpoints(graph)
            transcript_sink.write_block(
                TranscriptBlock(
                    rounds=batch.rounds[:cut],
                    modes=batch.modes[:cut],
                    left=np.stack([li, lj, batch.left_r, batch.left_s], axis=1)[:cut],
                    right=np.stack([ri, rj, batch.right_r, batch.right_s], axis=1)[:cut],
                    left_answers=np.stack([left_a1, left_a2], axis=1)[:cut],
                    right_answers=np.stack([right_a1, right_a2], axis=1)[:cut],
                    accepted=accepted[:cut],
                    reasons=reason_codes[:cut],
                    stamps=np.stack([emit_l, recv_l, emit_r, recv_r], axis=1)[:cut],
                )
            )

        result.rounds_run += cut
        result.failures += int(np.count_nonzero(~accepted[:cut]))
        reasons.update({reason.name: int(n) for reason, n in zip(Reason, np.bincount(reason_codes[:cut], minlength=len(Reason)))})
        modes.update({mode.name: int(n) for mode, n in zip(Mode, np.bincount(batch.modes[:cut], minlength=len(Mode)))})
        logger.debug(f"Block at round {start}: {cut} rounds, {result.failures} failures so far")
        if result.aborted:
            break

    result.duration_s = time.perf_counter() - started
    result.reasons = {name: n for name, n in reasons.items() if n}
    result.modes = {name: n for name, n in modes.items() if n}
    if result.aborted:
        logger.warning(f"Session aborted at round {result.first_failure_round} after {result.rounds_run} rounds")
    logger.info(
        f"Session finished: {result.rounds_run}/{total} rounds, {result.failures} failures, "
        f"{result.rounds_per_second:,.0f} rounds/s"
    )
    return result
