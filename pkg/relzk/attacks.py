"""
Cheating-prover analysis
Answer-table strategies for classical provers, exact pass probabilities over the
verifiers' challenge distribution, heuristic best responses and Monte Carlo checks.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.stats import binomtest

from relzk.config import get_settings
from relzk.errors import ContractViolation, SizeLimitError, UnknownProfileError
from relzk.graph import Colouring, Graph, brute_force_three_colour
from relzk.protocol import (
    Mode,
    SessionConfig,
    challenge_index,
    judge_batch,
    run_session,
    session_streams,
)
from relzk.randomness import ALL_SELECTORS, NodeSequence, build_node_sequence, permute_colours
from relzk.wire import challenge_fields, decode_challenges, encode_answers

logger = logging.getLogger(__name__)

TARGET_KS = (1, 10, 100)
CONFIDENCE = 0.99


@dataclass(frozen=True, eq=False)
class StrategyComponent:
    """Deterministic strategy: answer code a1 + 3*a2 per challenge index, one table per side"""

    left_table: np.ndarray
    right_table: np.ndarray


@dataclass(eq=False)
class StrategyProfile:
    name: str
    components: List[Tuple[Fraction, StrategyComponent]]

    def __post_init__(self):
        if not self.components:
            raise ContractViolation("a strategy profile needs at least one component")
        total = sum(weight for weight, _ in self.components)
        if total != 1:
            raise ContractViolation(f"component weights sum to {total}, not 1")

    @classmethod
    def deterministic(cls, name: str, component: StrategyComponent) -> "StrategyProfile":
        return cls(name, [(Fraction(1), component)])


@dataclass
class DetectionReport:
    profile: str
    num_vertices: int
    num_edges: int
    rounds: int
    exact: Optional[Fraction]
    estimate: float
    interval: Tuple[float, float]
    rounds_for_target_k: Dict[int, Optional[int]] = field(default_factory=dict)

    @property
    def per_round_pass_probability(self) -> Optional[Fraction]:
        return self.exact

    @property
    def covers_exact(self) -> bool:
        if self.exact is None:
            return True
        return self.interval[0] <= float(self.exact) <= self.interval[1]

    def to_lines(self) -> List[str]:
        exact = "n/a" if self.exact is None else f"{self.exact.numerator}/{self.exact.denominator}"
        lines = [
            f"profile={self.profile}",
            f"vertices={self.num_vertices}",
            f"edges={self.num_edges}",
            f"exact={exact}",
            f"rounds={self.rounds}",
            f"estimate={self.estimate:.6f}",
            f"interval={self.interval[0]:.6f},{self.interval[1]:.6f}",
        ]
        for k, needed in self.rounds_for_target_k.items():
            lines.append(f"rounds_for_target k={k} rounds={'unbounded' if needed is None else needed}")
        return lines


def num_challenges(g: Graph) -> int:
    return 8 * g.num_edges


def challenge_arrays(g: Graph) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(edge id, swapped, r, s) for every challenge index"""
    idx = np.arange(num_challenges(g), dtype=np.int64)
    return idx // 8, (idx // 4) % 2, (idx // 2) % 2 + 1, idx % 2 + 1


def count_challenge_pairs(g: Graph) -> int:
    return sum(8 * (1 + 4 * (g.degree(u) + g.degree(v))) for u, v in g.edges)


@dataclass(frozen=True, eq=False)
class PairTable:
    """Support of the verifiers' challenge-pair distribution with integer weights"""

    left: np.ndarray
    right: np.ndarray
    modes: np.ndarray
    slots: np.ndarray
    weights: np.ndarray
    denominator: int


def _oriented_index(g: Graph, first: int, second: int, r: int, s: int) -> int:
    i, j = g.edges[g.edge_id((first, second))]
    return challenge_index(g.edge_id((first, second)), int(first != i), r, s)


@lru_cache(maxsize=32)
def challenge_pair_table(g: Graph) -> PairTable:
    limit = get_settings().enumeration_limit
    total_pairs = count_challenge_pairs(g)
    if total_pairs > limit:
        raise SizeLimitError(f"{total_pairs} challenge pairs exceed the enumeration limit of {limit}")
    if g.num_edges == 0:
        raise ContractViolation("graph has no edges to ask about")

    unit = math.lcm(*[g.degree(v) for v in range(g.num_vertices) if g.degree(v)])
    colour_weight = 4 * unit
    left, right, modes, slots, weights = [], [], [], [], []

    for x, (e, swap, r, s) in enumerate(zip(*(a.tolist() for a in challenge_arrays(g)))):
        i, j = g.edges[e][swap], g.edges[e][1 - swap]
        left.append(x)
        right.append(challenge_index(e, swap, 3 - r, 3 - s))
        modes.append(Mode.COLOUR_TEST)
        slots.append(0)
        weights.append(colour_weight)

        for mode, vertex, constrained in ((Mode.CONSIST_FIRST, i, r), (Mode.CONSIST_SECOND, j, s)):
            share = 2 * unit // g.degree(vertex)
            for other in g.neighbours(vertex):
                for slot in (0, 1):
                    first, second = (vertex, other) if slot == 0 else (other, vertex)
                    for free in (1, 2):
                        rr, ss = (constrained, free) if slot == 0 else (free, constrained)
                        left.append(x)
                        right.append(_oriented_index(g, first, second, rr, ss))
                        modes.append(mode)
                        slots.append(slot)
                        weights.append(share)

    as_array = lambda values: np.array(values, dtype=np.int64)
    return PairTable(
        left=as_array(left),
        right=as_array(right),
        modes=as_array(modes),
        slots=as_array(slots),
        weights=as_array(weights),
        denominator=num_challenges(g) * 20 * unit,
    )


def _accepted(table: PairTable, left_codes: np.ndarray, right_codes: np.ndarray, rows=slice(None)) -> np.ndarray:
    accepted, _ = judge_batch(
        table.modes[rows], table.slots[rows], left_codes % 3, left_codes // 3, right_codes % 3, right_codes // 3
    )
    return accepted


def _pass_units(table: PairTable, component: StrategyComponent) -> int:
    left_codes = component.left_table.astype(np.int64)[table.left]
    right_codes = component.right_table.astype(np.int64)[table.right]
    return int(table.weights[_accepted(table, left_codes, right_codes)].sum())


def enumerate_pass_probability(g: Graph, profile: StrategyProfile) -> Fraction:
    """Exact per-round pass probability of a profile against the honest verifiers"""
    table = challenge_pair_table(g)
    expected = num_challenges(g)
    total = Fraction(0)
    for weight, component in profile.components:
        if component.left_table.shape != (expected,) or component.right_table.shape != (expected,):
            raise ContractViolation(f"answer tables must have {expected} entries")
        total += weight * Fraction(_pass_units(table, component), table.denominator)
    return total


# Profiles

def honest_component(g: Graph, colouring: Colouring, seq: NodeSequence, selector, common_vector: np.ndarray) -> StrategyComponent:
    edge_ids, swapped, r, s = challenge_arrays(g)
    edges = g.edge_array
    i = edges[edge_ids, swapped]
    j = edges[edge_ids, 1 - swapped]
    colours = permute_colours(colouring.as_array(), selector[0], selector[1])
    b = (seq.windows.astype(np.int64) @ np.asarray(common_vector, dtype=np.int64)) % 3
    codes = ((b[i] * r + colours[i]) % 3 + 3 * ((b[j] * s + colours[j]) % 3)).astype(np.uint8)
    return StrategyComponent(codes, codes.copy())


def _colouring_mixture(name: str, g: Graph, colouring: Colouring, rng: np.random.Generator) -> StrategyProfile:
    """One honest-style component per colour permutation, each with its own common vector"""
    seq = build_node_sequence(g.num_vertices, rng, graph=g)
    weight = Fraction(1, len(ALL_SELECTORS))
    components = [
        (weight, honest_component(g, colouring, seq, selector, rng.integers(0, 3, size=seq.window_length)))
        for selector in ALL_SELECTORS
    ]
    return StrategyProfile(name, components)


def monochromatic_edges(g: Graph, colouring: Colouring) -> int:
    colours = colouring.as_array()
    return int(np.count_nonzero(colours[g.edge_array[:, 0]] == colours[g.edge_array[:, 1]]))


def pseudo_colouring(g: Graph) -> Colouring:
    """A colouring with as few monochromatic edges as readily found, ideally exactly one"""
    if g.num_vertices <= get_settings().oracle_max_vertices:
        for edge in g.edges:
            witness = brute_force_three_colour(g.without_edge(edge))
            if witness is not None and monochromatic_edges(g, witness) <= 1:
                return witness

    greedy = nx.greedy_color(g.to_networkx(), strategy="largest_first")
    colours = [min(greedy[v], 2) for v in range(g.num_vertices)]
    for v in range(g.num_vertices):
        if greedy[v] > 2:
            clashes = [sum(colours[w] == c for w in g.neighbours(v)) for c in range(3)]
            colours[v] = int(np.argmin(clashes))
    return Colouring(tuple(colours))


def honest_profile(g: Graph, rng: np.random.Generator, colouring: Optional[Colouring] = None) -> StrategyProfile:
    colouring = colouring or brute_force_three_colour(g)
    if colouring is None:
        raise ContractViolation("honest profile needs a valid 3-colouring")
    return _colouring_mixture("honest", g, colouring, rng)


def fake_colouring_profile(g: Graph, rng: np.random.Generator, colouring: Optional[Colouring] = None) -> StrategyProfile:
    return _colouring_mixture("fake-colouring", g, pseudo_colouring(g), rng)


def constant_profile(g: Graph, rng: np.random.Generator, colouring: Optional[Colouring] = None) -> StrategyProfile:
    zeros = np.zeros(num_challenges(g), dtype=np.uint8)
    return StrategyProfile.deterministic("constant", StrategyComponent(zeros, zeros.copy()))


def consistency_only_profile(g: Graph, rng: np.random.Generator, colouring: Optional[Colouring] = None) -> StrategyProfile:
    """Answer a fixed per-vertex trit in each slot, ignoring randomisers"""
    answers = rng.integers(0, 3, size=g.num_vertices)
    edge_ids, swapped, _, _ = challenge_arrays(g)
    edges = g.edge_array
    codes = (answers[edges[edge_ids, swapped]] + 3 * answers[edges[edge_ids, 1 - swapped]]).astype(np.uint8)
    return StrategyProfile.deterministic("consistency-only", StrategyComponent(codes, codes.copy()))


def _improve_side(table: PairTable, tables: List[np.ndarray], side: int, groups: List[np.ndarray], order: np.ndarray) -> bool:
    """One coordinate-ascent sweep over one side's answer table"""
    candidates = np.arange(9, dtype=np.int64)[:, None]
    changed = False
    for x in order.tolist():
        rows = groups[x]
        if rows.size == 0:
            continue
        if side == 0:
            other = tables[1][table.right[rows]][None, :]
            accepted = _accepted(table, candidates, other, rows)
        else:
            other = tables[0][table.left[rows]][None, :]
            accepted = _accepted(table, other, candidates, rows)
        scores = accepted.astype(np.int64) @ table.weights[rows]
        best = int(np.argmax(scores))
        if scores[best] > scores[int(tables[side][x])]:
            tables[side][x] = best
            changed = True
    return changed


def _ascend(table: PairTable, start: StrategyComponent, groups, rng: np.random.Generator, max_sweeps: int = 50) -> StrategyComponent:
    tables = [start.left_table.astype(np.int64).copy(), start.right_table.astype(np.int64).copy()]
    for _ in range(max_sweeps):
        changed = False
        for side in (0, 1):
            changed |= _improve_side(table, tables, side, groups[side], rng.permutation(len(groups[side])))
        if not changed:
            break
    return StrategyComponent(tables[0].astype(np.uint8), tables[1].astype(np.uint8))


def best_response_search(
    g: Graph,
    rng: Optional[np.random.Generator] = None,
    restarts: int = 8,
    max_vertices: int = 8,
) -> Tuple[StrategyProfile, Fraction]:
    """
    Local search over deterministic answer-table pairs, seeded with the bundled
    strategies and random restarts. The exact value of the returned profile is a
    lower bound on the optimal classical pass probability.
    """
    if g.num_vertices > max_vertices:
        raise SizeLimitError(f"best-response search is limited to {max_vertices} vertices, graph has {g.num_vertices}")
    rng = rng if rng is not None else np.random.default_rng(0)
    table = challenge_pair_table(g)
    count = num_challenges(g)
    order = np.argsort(table.left, kind="stable")
    left_groups = np.split(order, np.searchsorted(table.left[order], np.arange(1, count)))
    order = np.argsort(table.right, kind="stable")
    right_groups = np.split(order, np.searchsorted(table.right[order], np.arange(1, count)))
    groups = (left_groups, right_groups)

    starts: List[StrategyComponent] = []
    for builder in (fake_colouring_profile, constant_profile, consistency_only_profile):
        starts.append(builder(g, rng).components[0][1])
    colouring = brute_force_three_colour(g)
    if colouring is not None:
        starts.append(honest_profile(g, rng, colouring).components[0][1])
    for _ in range(restarts):
        random_left = rng.integers(0, 9, size=count).astype(np.uint8)
        starts.append(StrategyComponent(random_left, rng.integers(0, 9, size=count).astype(np.uint8)))

    best, best_units = None, -1
    for start in starts:
        candidate = _ascend(table, start, groups, rng)
        units = _pass_units(table, candidate)
        if units > best_units:
            best, best_units = candidate, units
    profile = StrategyProfile.deterministic("best-response", best)
    value = enumerate_pass_probability(g, profile)
    logger.info(f"Best response on |V|={g.num_vertices} |E|={g.num_edges}: pass probability {value}")
    return profile, value


def _best_response_profile(g: Graph, rng: np.random.Generator, colouring: Optional[Colouring] = None) -> StrategyProfile:
    return best_response_search(g, rng)[0]


PROFILES: Dict[str, Callable[..., StrategyProfile]] = {
    "honest": honest_profile,
    "fake-colouring": fake_colouring_profile,
    "constant": constant_profile,
    "consistency-only": consistency_only_profile,
    "best-response": _best_response_profile,
}


def build_profile(name: str, g: Graph, seed: int = 0, colouring: Optional[Colouring] = None) -> StrategyProfile:
    if name not in PROFILES:
        raise UnknownProfileError(f"unknown profile {name!r}; known: {', '.join(sorted(PROFILES))}")
    return PROFILES[name](g, np.random.default_rng(seed), colouring)


# Simulation

class StrategyProver:
    """Plays one side of a profile; the mixture component comes from the shared randomness"""

    def __init__(self, profile: StrategyProfile, side: str, shared_seed):
        if side not in ("left", "right"):
            raise ContractViolation(f"side must be left or right, got {side!r}")
        self.tables = [comp.left_table if side == "left" else comp.right_table for _, comp in profile.components]
        self.cumulative = np.cumsum([float(weight) for weight, _ in profile.components])
        self._rng = np.random.default_rng(shared_seed)

    def answer_frames(self, frames: bytes) -> bytes:
        rounds, edge_ids, swapped, r, s = challenge_fields(decode_challenges(frames))
        picks = np.searchsorted(self.cumulative, self._rng.random(rounds.shape[0]), side="right")
        picks = np.minimum(picks, len(self.tables) - 1)
        stacked = np.stack(self.tables).astype(np.int64)
        codes = stacked[picks, challenge_index(edge_ids, swapped, r, s)]
        return encode_answers(rounds, codes % 3, codes // 3)


def rounds_for_target(p, k: int) -> Optional[int]:
    """Smallest R with p^R <= e^-k; None when p = 1"""
    p = float(p)
    if p >= 1.0:
        return None
    if p <= 0.0:
        return 1
    return math.ceil(k / -math.log(p))


def wilson_interval(successes: int, trials: int, confidence: float = CONFIDENCE) -> Tuple[float, float]:
    """Wilson score interval; the bound on the observed side is exact when every trial agrees"""
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(successes, trials).proportion_ci(confidence_level=confidence, method="wilson")
    low, high = float(ci.low), float(ci.high)
    if successes == trials:
        high = 1.0
    if successes == 0:
        low = 0.0
    return max(0.0, low), min(1.0, high)


def simulate_attack(g: Graph, profile: StrategyProfile, rounds: int, seed: int) -> DetectionReport:
    """Run the protocol engine against the profile and compare with exact enumeration"""
    streams = session_streams(seed)
    left = StrategyProver(profile, "left", streams.shared)
    right = StrategyProver(profile, "right", streams.shared)
    cfg = SessionConfig(graph=g, seed=seed, rounds=rounds, abort_on_first_failure=False)
    result = run_session(cfg, left, right)

    passes = result.rounds_run - result.failures
    try:
        exact = enumerate_pass_probability(g, profile)
    except SizeLimitError:
        logger.warning(f"Enumeration skipped for |E|={g.num_edges}; reporting sampled estimate only")
        exact = None
    estimate = passes / result.rounds_run if result.rounds_run else 1.0
    target_p = exact if exact is not None else estimate
    return DetectionReport(
        profile=profile.name,
        num_vertices=g.num_vertices,
        num_edges=g.num_edges,
        rounds=result.rounds_run,
        exact=exact,
        estimate=estimate,
        interval=wilson_interval(passes, result.rounds_run),
        rounds_for_target_k={k: rounds_for_target(target_p, k) for k in TARGET_KS},
    )


def simulate_attack_sweep(g: Graph, profile: StrategyProfile, rounds: int, seeds: Sequence[int], max_workers: int = 4) -> List[DetectionReport]:
    """simulate_attack for several seeds concurrently, results in seed order"""
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(lambda seed: simulate_attack(g, profile, rounds, seed), seeds))
