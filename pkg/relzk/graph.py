"""
Graphs and 3-colourings
Canonical graph values, the exhaustive colouring oracle, criticality checks,
Hajós-style assembly and generation of hard instances with a tracked certificate.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

from relzk.config import get_settings
from relzk.errors import (
    ColouringTrackingError,
    ConfigurationError,
    ContractViolation,
    GraphFormatError,
    InvalidEdgeError,
    SizeLimitError,
)

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

ALL_COLOURS = 0b111


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph; edges are (i, j) with i < j, sorted"""

    num_vertices: int
    edges: Tuple[Edge, ...]

    def __post_init__(self):
        if self.num_vertices < 1:
            raise ContractViolation(f"graph needs at least one vertex, got {self.num_vertices}")
        previous = None
        for edge in self.edges:
            i, j = edge
            if i == j:
                raise ContractViolation(f"self-loop at vertex {i}")
            if not 0 <= i < j < self.num_vertices:
                raise ContractViolation(f"edge {edge} is not normalised or out of range for |V|={self.num_vertices}")
            if previous is not None and edge <= previous:
                raise ContractViolation(f"edges must be sorted and unique, {edge} follows {previous}")
            previous = edge

    @classmethod
    def from_edges(cls, num_vertices: int, pairs: Iterable[Sequence[int]]) -> "Graph":
        """Normalise orientation, drop nothing, reject duplicates and loops"""
        normalised = []
        seen = set()
        for pair in pairs:
            i, j = int(pair[0]), int(pair[1])
            if i == j:
                raise ContractViolation(f"self-loop at vertex {i}")
            edge = (min(i, j), max(i, j))
            if edge in seen:
                raise ContractViolation(f"duplicate edge {edge}")
            seen.add(edge)
            normalised.append(edge)
        return cls(num_vertices, tuple(sorted(normalised)))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def _edge_ids(self) -> Dict[Edge, int]:
        return {edge: idx for idx, edge in enumerate(self.edges)}

    @cached_property
    def _adjacency(self) -> Tuple[Tuple[int, ...], ...]:
        adjacency: List[List[int]] = [[] for _ in range(self.num_vertices)]
        for i, j in self.edges:
            adjacency[i].append(j)
            adjacency[j].append(i)
        return tuple(tuple(sorted(neigh)) for neigh in adjacency)

    @cached_property
    def _incidence(self) -> Tuple[Tuple[int, ...], ...]:
        incidence: List[List[int]] = [[] for _ in range(self.num_vertices)]
        for idx, (i, j) in enumerate(self.edges):
            incidence[i].append(idx)
            incidence[j].append(idx)
        return tuple(tuple(ids) for ids in incidence)

    @cached_property
    def edge_array(self) -> np.ndarray:
        """(|E|, 2) int64 array of the canonical edge list"""
        array = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        array.setflags(write=False)
        return array

    def has_edge(self, edge: Sequence[int]) -> bool:
        i, j = edge
        return (min(i, j), max(i, j)) in self._edge_ids

    def edge_id(self, edge: Sequence[int]) -> int:
        i, j = edge
        key = (min(i, j), max(i, j))
        if key not in self._edge_ids:
            raise InvalidEdgeError(f"edge {tuple(edge)} is not in the graph")
        return self._edge_ids[key]

    def neighbours(self, vertex: int) -> Tuple[int, ...]:
        return self._adjacency[vertex]

    def degree(self, vertex: int) -> int:
        return len(self._adjacency[vertex])

    def incident_edges(self, vertex: int) -> Tuple[int, ...]:
        """Ids of the edges touching vertex, in canonical order"""
        return self._incidence[vertex]

    def without_edge(self, edge: Sequence[int]) -> "Graph":
        idx = self.edge_id(edge)
        return Graph(self.num_vertices, self.edges[:idx] + self.edges[idx + 1:])

    def with_edge(self, edge: Sequence[int]) -> "Graph":
        if self.has_edge(edge):
            raise InvalidEdgeError(f"edge {tuple(edge)} is already present")
        return Graph.from_edges(self.num_vertices, list(self.edges) + [tuple(edge)])

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.num_vertices))
        graph.add_edges_from(self.edges)
        return graph


@dataclass(frozen=True)
class Colouring:
    colours: Tuple[int, ...]

    def __post_init__(self):
        for colour in self.colours:
            if colour not in (0, 1, 2):
                raise ContractViolation(f"colours must be in {{0,1,2}}, got {colour}")

    @classmethod
    def from_sequence(cls, values: Iterable[int]) -> "Colouring":
        return cls(tuple(int(v) for v in values))

    def __len__(self) -> int:
        return len(self.colours)

    def as_array(self) -> np.ndarray:
        return np.array(self.colours, dtype=np.int64)


@dataclass
class CriticalityReport:
    is_three_colourable: bool
    is_four_critical: bool
    witness_colourings: Dict[Edge, Colouring] = field(default_factory=dict)
    near_four_clique: Optional[Tuple[int, int, int, int]] = None
    notes: List[str] = field(default_factory=list)


def validate_colouring(g: Graph, c: Colouring) -> bool:
    """True iff no edge of g is monochromatic under c"""
    if len(c) != g.num_vertices:
        raise ContractViolation(f"colouring has length {len(c)}, graph has {g.num_vertices} vertices")
    if g.num_edges == 0:
        return True
    colours = c.as_array()
    edges = g.edge_array
    return bool(np.all(colours[edges[:, 0]] != colours[edges[:, 1]]))


def _propagate(adjacency, domains: List[int], colours: List[int], vertex: int, colour: int) -> bool:
    """Assign and forward-check; singleton domains are assigned in turn"""
    pending = [(vertex, colour)]
    while pending:
        v, col = pending.pop()
        if colours[v] >= 0:
            if colours[v] != col:
                return False
            continue
        colours[v] = col
        domains[v] = 1 << col
        mask = ~(1 << col)
        for w in adjacency[v]:
            if colours[w] >= 0:
                if colours[w] == col:
                    return False
                continue
            domains[w] &= mask
            if domains[w] == 0:
                return False
            if domains[w] & (domains[w] - 1) == 0:
                pending.append((w, domains[w].bit_length() - 1))
    return True


def _backtrack(adjacency, domains: List[int], colours: List[int], max_used: int) -> Optional[List[int]]:
    best = -1
    best_size = 4
    for v, col in enumerate(colours):
        if col < 0:
            size = bin(domains[v]).count("1")
            if size < best_size:
                best, best_size = v, size
    if best < 0:
        return colours

    for colour in range(min(max_used + 1, 2) + 1):
        if not domains[best] & (1 << colour):
            continue
        trial_domains = list(domains)
        trial_colours = list(colours)
        if not _propagate(adjacency, trial_domains, trial_colours, best, colour):
            continue
        used = max(max_used, max(trial_colours))
        found = _backtrack(adjacency, trial_domains, trial_colours, used)
        if found is not None:
            return found
    return None


def brute_force_three_colour(g: Graph, max_vertices: Optional[int] = None) -> Optional[Colouring]:
    """
    Exhaustive 3-colouring search with forward checking.
    Colours are introduced in order, so the first vertex tried always gets colour 0.
    """
    bound = max_vertices if max_vertices is not None else get_settings().oracle_max_vertices
    if g.num_vertices > bound:
        raise SizeLimitError(f"oracle bound is {bound} vertices, graph has {g.num_vertices}")

    adjacency = [g.neighbours(v) for v in range(g.num_vertices)]
    found = _backtrack(adjacency, [ALL_COLOURS] * g.num_vertices, [-1] * g.num_vertices, -1)
    if found is None:
        return None
    return Colouring(tuple(found))


def has_near_four_clique(g: Graph) -> Optional[Tuple[int, int, int, int]]:
    """Lexicographically first 4-vertex set inducing at least 5 edges, if any"""
    best = None
    for u, v in g.edges:
        common = sorted(set(g.neighbours(u)) & set(g.neighbours(v)))
        for a_idx in range(len(common)):
            for b_idx in range(a_idx + 1, len(common)):
                candidate = tuple(sorted((u, v, common[a_idx], common[b_idx])))
                if best is None or candidate < best:
                    best = candidate
    return best


def is_four_critical(g: Graph, max_vertices: Optional[int] = None) -> CriticalityReport:
    colouring = brute_force_three_colour(g, max_vertices)
    report = CriticalityReport(
        is_three_colourable=colouring is not None,
        is_four_critical=False,
        near_four_clique=has_near_four_clique(g),
    )
    if not nx.is_connected(g.to_networkx()):
        report.notes.append("graph not connected")
    if colouring is not None:
        return report

    witnesses: Dict[Edge, Colouring] = {}
    for edge in g.edges:
        witness = brute_force_three_colour(g.without_edge(edge), max_vertices)
        if witness is None:
            report.notes.append(f"deleting {edge} leaves a graph that is not 3-colourable")
            return report
        witnesses[edge] = witness

    report.is_four_critical = True
    report.witness_colourings = witnesses
    return report


def _canonical_order(num_vertices: int, edges: Iterable[Edge]) -> np.ndarray:
    """New index for every old vertex: BFS from vertex 0, then leftovers by index"""
    graph = nx.Graph()
    graph.add_nodes_from(range(num_vertices))
    graph.add_edges_from(edges)
    order = [0] + [v for _, v in nx.bfs_edges(graph, 0, sort_neighbors=sorted)]
    visited = set(order)
    order.extend(v for v in range(num_vertices) if v not in visited)
    relabel = np.empty(num_vertices, dtype=np.int64)
    relabel[np.array(order, dtype=np.int64)] = np.arange(num_vertices)
    return relabel


@dataclass(frozen=True)
class _Join:
    graph: Graph
    first_map: np.ndarray
    second_map: np.ndarray
    new_edge: Edge


def _join(g1: Graph, e1: Sequence[int], g2: Graph, e2: Sequence[int]) -> _Join:
    if not g1.has_edge(e1):
        raise InvalidEdgeError(f"edge {tuple(e1)} is not in the first graph")
    if not g2.has_edge(e2):
        raise InvalidEdgeError(f"edge {tuple(e2)} is not in the second graph")
    u, v = int(e1[0]), int(e1[1])
    x, y = int(e2[0]), int(e2[1])

    n1, n2 = g1.num_vertices, g2.num_vertices
    second = np.empty(n2, dtype=np.int64)
    next_index = n1
    for w in range(n2):
        if w == x:
            second[w] = u
        else:
            second[w] = next_index
            next_index += 1

    removed_first = (min(u, v), max(u, v))
    removed_second = (min(x, y), max(x, y))
    raw_edges = [edge for edge in g1.edges if edge != removed_first]
    raw_edges += [(int(second[a]), int(second[b])) for a, b in g2.edges if (a, b) != removed_second]
    raw_edges.append((v, int(second[y])))

    total = n1 + n2 - 1
    relabel = _canonical_order(total, raw_edges)
    graph = Graph.from_edges(total, [(relabel[a], relabel[b]) for a, b in raw_edges])
    new_a, new_b = int(relabel[v]), int(relabel[second[y]])
    return _Join(
        graph=graph,
        first_map=relabel[np.arange(n1)],
        second_map=relabel[second],
        new_edge=(min(new_a, new_b), max(new_a, new_b)),
    )


def assemble(g1: Graph, e1: Sequence[int], g2: Graph, e2: Sequence[int]) -> Graph:
    """
    Hajós join: drop e1=(u,v) from g1 and e2=(x,y) from g2, identify u with x,
    add (v,y), renumber canonically.
    """
    joined = _join(g1, e1, g2, e2).graph
    logger.debug(f"Assembled {g1.num_vertices}+{g2.num_vertices} vertices into {joined.num_vertices}")
    return joined


def _join_witnesses(g1: Graph, w1: np.ndarray, e1: Edge, g2: Graph, w2: np.ndarray, e2: Edge) -> Tuple[Graph, np.ndarray]:
    """Join two critical graphs and carry their edge-deletion witness maps across"""
    joined = _join(g1, e1, g2, e2)
    graph = joined.graph
    u, x = e1[0], e2[0]
    first_removed = g1.edge_id(e1)
    second_removed = g2.edge_id(e2)

    witnesses = np.empty((graph.num_edges, graph.num_vertices), dtype=np.int8)

    def place(first_row: np.ndarray, second_row: np.ndarray) -> np.ndarray:
        row = np.empty(graph.num_vertices, dtype=np.int8)
        shift = (int(first_row[u]) - int(second_row[x])) % 3
        row[joined.second_map] = (second_row + shift) % 3
        row[joined.first_map] = first_row
        return row

    for idx, (a, b) in enumerate(g1.edges):
        if idx == first_removed:
            continue
        new_a, new_b = joined.first_map[a], joined.first_map[b]
        target = graph.edge_id((new_a, new_b))
        witnesses[target] = place(w1[idx], w2[second_removed])

    witnesses[graph.edge_id(joined.new_edge)] = place(w1[first_removed], w2[second_removed])

    for idx, (a, b) in enumerate(g2.edges):
        if idx == second_removed:
            continue
        new_a, new_b = joined.second_map[a], joined.second_map[b]
        target = graph.edge_id((new_a, new_b))
        witnesses[target] = place(w1[first_removed], w2[idx])

    return graph, witnesses


@lru_cache(maxsize=None)
def seed_witness_map(seed: Graph, allow_near_cliques: bool = False) -> np.ndarray:
    """(|E|, |V|) colourings of seed minus each edge; the seed must be 4-critical"""
    report = is_four_critical(seed)
    if not report.is_four_critical:
        raise ConfigurationError(f"seed with {seed.num_vertices} vertices is not 4-critical")
    if report.near_four_clique is not None and not allow_near_cliques:
        raise ConfigurationError(f"seed with {seed.num_vertices} vertices contains near-4-clique {report.near_four_clique}")
    witnesses = np.array([report.witness_colourings[edge].colours for edge in seed.edges], dtype=np.int8)
    witnesses.setflags(write=False)
    return witnesses


def _random_oriented_edge(g: Graph, rng: np.random.Generator) -> Edge:
    i, j = g.edges[int(rng.integers(g.num_edges))]
    if rng.integers(2):
        return (j, i)
    return (i, j)


@dataclass(frozen=True)
class GeneratedInstance:
    graph: Graph
    colouring: Colouring
    removed_edge: Edge
    critical_graph: Graph
    joins: int


def _reachable_gaps(increments: Sequence[int], limit: int) -> np.ndarray:
    """reach[g] is True when some multiset of join increments sums to exactly g"""
    reach = np.zeros(max(limit, 0) + 1, dtype=bool)
    reach[0] = True
    for gap in range(1, reach.size):
        reach[gap] = any(inc <= gap and reach[gap - inc] for inc in increments)
    return reach


def _pick(candidates: Sequence[int], pool_size: int, rng: np.random.Generator) -> int:
    if candidates:
        return int(candidates[int(rng.integers(len(candidates)))])
    return int(rng.integers(pool_size))


def build_instance(
    seed_pool: Sequence[Graph],
    target_vertices: int,
    rng: np.random.Generator,
    allow_near_cliques: bool = False,
) -> GeneratedInstance:
    """
    Assemble random seeds up to target_vertices, then delete one uniformly random edge.
    Each join adds |V_seed| - 1 vertices; seeds are drawn among those that keep the
    target exactly reachable, so |V| equals the target whenever the pool allows it.
    Otherwise joins continue until |V| >= target.
    """
    if not seed_pool:
        raise ConfigurationError("seed pool is empty")
    maps = [seed_witness_map(seed, allow_near_cliques) for seed in seed_pool]
    sizes = [seed.num_vertices for seed in seed_pool]
    increments = [n - 1 for n in sizes]
    reach = _reachable_gaps(increments, target_vertices - min(sizes))

    starts = [i for i, n in enumerate(sizes) if n <= target_vertices and reach[target_vertices - n]]
    exact = bool(starts)
    if not exact:
        logger.debug(f"No seed combination reaches exactly {target_vertices} vertices")
    pick = _pick(starts, len(seed_pool), rng)
    current, witnesses = seed_pool[pick], np.array(maps[pick])
    joins = 0
    while current.num_vertices < target_vertices:
        gap = target_vertices - current.num_vertices
        options = [i for i, inc in enumerate(increments) if inc <= gap and reach[gap - inc]] if exact else []
        pick = _pick(options, len(seed_pool), rng)
        seed = seed_pool[pick]
        e1 = _random_oriented_edge(current, rng)
        e2 = _random_oriented_edge(seed, rng)
        current, witnesses = _join_witnesses(current, witnesses, e1, seed, maps[pick], e2)
        joins += 1
        logger.debug(f"Join {joins}: |V|={current.num_vertices} |E|={current.num_edges}")

    removed_idx = int(rng.integers(current.num_edges))
    removed = current.edges[removed_idx]
    graph = current.without_edge(removed)
    colouring = Colouring(tuple(int(c) for c in witnesses[removed_idx]))
    if not validate_colouring(graph, colouring):
        raise ColouringTrackingError(f"tracked colouring is invalid after removing {removed}")

    logger.info(f"Generated instance: |V|={graph.num_vertices} |E|={graph.num_edges} after {joins} joins")
    return GeneratedInstance(graph, colouring, removed, current, joins)


def generate_instance(
    seed_pool: Sequence[Graph],
    target_vertices: int,
    rng: np.random.Generator,
    allow_near_cliques: bool = False,
) -> Tuple[Graph, Colouring]:
    instance = build_instance(seed_pool, target_vertices, rng, allow_near_cliques)
    return instance.graph, instance.colouring


def demo_instance() -> Tuple[Graph, Colouring]:
    """Six-vertex demonstration instance with its certificate"""
    graph = Graph.from_edges(6, [(0, 1), (0, 3), (0, 5), (1, 2), (1, 5), (2, 3), (2, 4), (3, 4), (4, 5)])
    return graph, Colouring((0, 1, 0, 2, 1, 2))


# Graph file format

def format_graph_text(g: Graph, colouring: Optional[Colouring] = None, header: Sequence[str] = ()) -> str:
    lines = list(header)
    lines.append(f"p edge {g.num_vertices} {g.num_edges}")
    lines.extend(f"e {i + 1} {j + 1}" for i, j in g.edges)
    if colouring is not None:
        if len(colouring) != g.num_vertices:
            raise ContractViolation(f"colouring has length {len(colouring)}, graph has {g.num_vertices} vertices")
        lines.extend(f"c {v + 1} {col}" for v, col in enumerate(colouring.colours))
    return "\n".join(lines) + "\n"


def _ints(tokens: List[str], line_no: int) -> List[int]:
    try:
        return [int(tok) for tok in tokens]
    except ValueError:
        raise GraphFormatError(f"expected integers, got {' '.join(tokens)!r}", line_no)


def parse_graph_text(text: str) -> Tuple[Graph, Optional[Colouring]]:
    """Parse the `p edge` / `e` / `c` format; `#` lines are skipped"""
    num_vertices = None
    declared_edges = 0
    edges: List[Edge] = []
    seen = set()
    colours: Dict[int, int] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        kind = tokens[0]

        if kind == "p":
            if num_vertices is not None:
                raise GraphFormatError("duplicate header", line_no)
            if len(tokens) != 4 or tokens[1] != "edge":
                raise GraphFormatError(f"bad header {line!r}", line_no)
            num_vertices, declared_edges = _ints(tokens[2:], line_no)
            if num_vertices < 1 or declared_edges < 0:
                raise GraphFormatError(f"bad header counts {line!r}", line_no)
            continue

        if num_vertices is None:
            raise GraphFormatError("record before `p edge` header", line_no)
        if len(tokens) != 3:
            raise GraphFormatError(f"expected 3 fields, got {line!r}", line_no)
        a, b = _ints(tokens[1:], line_no)

        if kind == "e":
            if a == b:
                raise GraphFormatError(f"self-loop at vertex {a}", line_no)
            if not (1 <= a <= num_vertices and 1 <= b <= num_vertices):
                raise GraphFormatError(f"vertex out of range in {line!r}", line_no)
            edge = (min(a, b) - 1, max(a, b) - 1)
            if edge in seen:
                raise GraphFormatError(f"duplicate edge {line!r}", line_no)
            seen.add(edge)
            edges.append(edge)
        elif kind == "c":
            if not 1 <= a <= num_vertices:
                raise GraphFormatError(f"vertex out of range in {line!r}", line_no)
            if b not in (0, 1, 2):
                raise GraphFormatError(f"colour must be 0, 1 or 2 in {line!r}", line_no)
            if a - 1 in colours:
                raise GraphFormatError(f"vertex {a} coloured twice", line_no)
            colours[a - 1] = b
        else:
            raise GraphFormatError(f"unknown record type {kind!r}", line_no)

    if num_vertices is None:
        raise GraphFormatError("missing `p edge` header")
    if len(edges) != declared_edges:
        raise GraphFormatError(f"header declares {declared_edges} edges, found {len(edges)}")
    graph = Graph(num_vertices, tuple(sorted(edges)))

    colouring = None
    if colours:
        if len(colours) != num_vertices:
            raise GraphFormatError(f"colouring covers {len(colours)} of {num_vertices} vertices")
        colouring = Colouring(tuple(colours[v] for v in range(num_vertices)))
    return graph, colouring


def read_graph_file(path: Union[str, Path]) -> Tuple[Graph, Optional[Colouring]]:
    text = Path(path).read_text(encoding="utf-8")
    graph, colouring = parse_graph_text(text)
    logger.info(f"Loaded {path}: |V|={graph.num_vertices} |E|={graph.num_edges} certificate={'yes' if colouring else 'no'}")
    return graph, colouring


def write_graph_file(path: Union[str, Path], g: Graph, colouring: Optional[Colouring] = None, header: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(format_graph_text(g, colouring, header))
