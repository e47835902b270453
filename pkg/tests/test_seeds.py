import networkx as nx
import pytest

from relzk.graph import Graph, has_near_four_clique, is_four_critical
from relzk.seeds import (
    GROETZSCH,
    HARDNESS_SEEDS,
    K4,
    MYCIELSKI_C5_TWO_LEVELS,
    MYCIELSKI_C7,
    MYCIELSKI_C9,
    W5,
    cycle_graph,
    mycielskian,
    odd_wheel,
    seed_pool_for,
)


@pytest.mark.parametrize(
    "seed, vertices, edges",
    [(K4, 4, 6), (W5, 6, 10), (GROETZSCH, 11, 20), (MYCIELSKI_C7, 15, 28),
     (MYCIELSKI_C5_TWO_LEVELS, 16, 30), (MYCIELSKI_C9, 19, 36)],
)
def test_seed_sizes(seed, vertices, edges):
    assert (seed.num_vertices, seed.num_edges) == (vertices, edges)


@pytest.mark.parametrize("seed", HARDNESS_SEEDS)
def test_hardness_seeds_are_triangle_free(seed):
    assert sum(nx.triangles(seed.to_networkx()).values()) == 0
    assert has_near_four_clique(seed) is None


def test_mycielski_c7_is_four_critical():
    assert is_four_critical(MYCIELSKI_C7).is_four_critical


def test_two_level_seed_is_four_critical():
    report = is_four_critical(MYCIELSKI_C5_TWO_LEVELS)
    assert report.is_four_critical
    assert report.near_four_clique is None


def test_hardness_pool_mixes_parities():
    assert {seed.num_vertices % 2 for seed in HARDNESS_SEEDS} == {0, 1}


def test_one_level_is_classic_construction():
    assert mycielskian(cycle_graph(5), levels=1) == GROETZSCH


def test_levels_must_be_positive():
    with pytest.raises(ValueError):
        mycielskian(cycle_graph(5), levels=0)


def test_mycielskian_of_edge_is_five_cycle():
    shape = mycielskian(Graph.from_edges(2, [(0, 1)]))
    assert nx.is_isomorphic(shape.to_networkx(), nx.cycle_graph(5))


def test_cycle_graph_edges():
    assert cycle_graph(5).edges == ((0, 1), (0, 4), (1, 2), (2, 3), (3, 4))


def test_odd_wheel_needs_odd_rim():
    with pytest.raises(ValueError):
        odd_wheel(4)


def test_seed_pool_for_small_targets():
    assert seed_pool_for(4) == [K4]
    assert seed_pool_for(10) == [K4]
    assert seed_pool_for(11) == HARDNESS_SEEDS
