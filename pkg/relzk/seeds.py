"""
Seed graphs for instance generation
Small 4-critical graphs joined together by relzk.graph.build_instance.
"""

from typing import List

from relzk.graph import Graph


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def odd_wheel(rim: int = 5) -> Graph:
    """Cycle on 0..rim-1 plus hub vertex `rim` joined to every rim vertex"""
    if rim % 2 == 0:
        raise ValueError(f"odd wheel needs an odd rim, got {rim}")
    spokes = [(v, rim) for v in range(rim)]
    return Graph.from_edges(rim + 1, list(cycle_graph(rim).edges) + spokes)


def mycielskian(g: Graph, levels: int = 1) -> Graph:
    """
    Generalized Mycielski construction. Vertex v of level i is i*n+v; level 0 is a
    copy of g, vertex v on level i+1 copies the neighbourhood of v on level i, and
    apex (levels+1)*n is joined to every vertex of the top level. levels=1 is the
    classic shadow-and-apex construction.
    """
    if levels < 1:
        raise ValueError(f"levels must be positive, got {levels}")
    n = g.num_vertices
    edges = list(g.edges)
    for level in range(levels):
        low, high = level * n, (level + 1) * n
        for i, j in g.edges:
            edges.append((low + i, high + j))
            edges.append((low + j, high + i))
    apex = (levels + 1) * n
    edges.extend((levels * n + i, apex) for i in range(n))
    return Graph.from_edges(apex + 1, edges)


K4 = complete_graph(4)
W5 = odd_wheel(5)
GROETZSCH = mycielskian(cycle_graph(5))
MYCIELSKI_C7 = mycielskian(cycle_graph(7))
MYCIELSKI_C9 = mycielskian(cycle_graph(9))
# Even order; joining it flips the parity of |V|
MYCIELSKI_C5_TWO_LEVELS = mycielskian(cycle_graph(5), levels=2)

# Triangle-free, so joins never create a near-4-clique
HARDNESS_SEEDS: List[Graph] = [GROETZSCH, MYCIELSKI_C7, MYCIELSKI_C5_TWO_LEVELS, MYCIELSKI_C9]

# Contain near-4-cliques; only for small instances and tests
TEST_SEEDS: List[Graph] = [K4, W5]


def seed_pool_for(target_vertices: int) -> List[Graph]:
    """Pool used by the command line: K4 below the smallest hardness seed"""
    if target_vertices < min(seed.num_vertices for seed in HARDNESS_SEEDS):
        return [K4]
    return list(HARDNESS_SEEDS)
