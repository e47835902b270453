from pathlib import Path

import numpy as np
import pytest

from relzk.errors import (
    ConfigurationError,
    ContractViolation,
    GraphFormatError,
    InvalidEdgeError,
    SizeLimitError,
)
from relzk.graph import (
    Colouring,
    Graph,
    assemble,
    brute_force_three_colour,
    build_instance,
    format_graph_text,
    generate_instance,
    has_near_four_clique,
    is_four_critical,
    parse_graph_text,
    read_graph_file,
    seed_witness_map,
    validate_colouring,
    write_graph_file,
)
from relzk.seeds import GROETZSCH, HARDNESS_SEEDS, K4, W5

INSTANCES = Path(__file__).resolve().parent.parent / "instances"


class TestGraphValue:
    def test_from_edges_normalises_and_sorts(self):
        g = Graph.from_edges(3, [(2, 1), (1, 0)])
        assert g.edges == ((0, 1), (1, 2))

    def test_unsorted_edges_rejected(self):
        with pytest.raises(ContractViolation):
            Graph(3, ((1, 2), (0, 1)))

    def test_self_loop_rejected(self):
        with pytest.raises(ContractViolation):
            Graph.from_edges(3, [(1, 1)])

    def test_duplicate_edge_rejected(self):
        with pytest.raises(ContractViolation):
            Graph.from_edges(3, [(0, 1), (1, 0)])

    def test_edge_id_unknown_edge(self, demo):
        g, _ = demo
        with pytest.raises(InvalidEdgeError):
            g.edge_id((0, 2))

    def test_neighbours_and_incidence(self, demo):
        g, _ = demo
        assert g.neighbours(0) == (1, 3, 5)
        assert g.degree(0) == 3
        assert [g.edges[e] for e in g.incident_edges(0)] == [(0, 1), (0, 3), (0, 5)]

    def test_without_and_with_edge(self, k4):
        smaller = k4.without_edge((2, 0))
        assert smaller.num_edges == 5
        assert not smaller.has_edge((0, 2))
        assert smaller.with_edge((0, 2)) == k4
        with pytest.raises(InvalidEdgeError):
            k4.with_edge((0, 1))


class TestValidateColouring:
    def test_demo_certificate(self, demo):
        g, c = demo
        assert validate_colouring(g, c)

    def test_monochromatic_edge(self, demo):
        g, _ = demo
        assert not validate_colouring(g, Colouring((0, 0, 1, 2, 1, 2)))

    def test_length_mismatch(self, demo):
        g, _ = demo
        with pytest.raises(ContractViolation):
            validate_colouring(g, Colouring((0, 1, 2)))

    def test_edgeless_graph_always_valid(self):
        assert validate_colouring(Graph(2, ()), Colouring((1, 1)))

    def test_colour_range(self):
        with pytest.raises(ContractViolation):
            Colouring((0, 3))


class TestOracle:
    def test_k4_not_colourable(self, k4):
        assert brute_force_three_colour(k4) is None

    def test_triangle_first_vertex_gets_colour_zero(self, triangle):
        colouring = brute_force_three_colour(triangle)
        assert colouring is not None
        assert colouring.colours[0] == 0
        assert sorted(colouring.colours) == [0, 1, 2]

    def test_demo_graph_colourable(self, demo):
        g, _ = demo
        colouring = brute_force_three_colour(g)
        assert colouring is not None and validate_colouring(g, colouring)

    def test_size_bound(self, k4):
        with pytest.raises(SizeLimitError):
            brute_force_three_colour(k4, max_vertices=3)

    def test_groetzsch_needs_four_colours(self):
        assert brute_force_three_colour(GROETZSCH) is None


class TestCriticality:
    def test_near_four_clique_in_k4_minus_edge(self, k4):
        assert has_near_four_clique(k4.without_edge((0, 1))) == (0, 1, 2, 3)

    def test_no_near_four_clique_in_triangle_free_seed(self):
        assert has_near_four_clique(GROETZSCH) is None

    @pytest.mark.parametrize("seed", [K4, W5, GROETZSCH])
    def test_seeds_are_four_critical(self, seed):
        report = is_four_critical(seed)
        assert not report.is_three_colourable
        assert report.is_four_critical
        for edge, witness in report.witness_colourings.items():
            assert validate_colouring(seed.without_edge(edge), witness)

    def test_colourable_graph_is_not_critical(self, demo):
        g, _ = demo
        report = is_four_critical(g)
        assert report.is_three_colourable
        assert not report.is_four_critical

    def test_disconnected_graph_noted(self):
        g = Graph.from_edges(5, K4.edges)
        report = is_four_critical(g)
        assert "graph not connected" in report.notes


class TestAssemble:
    def test_k4_join_k4(self, k4):
        joined = assemble(k4, (0, 1), k4, (0, 1))
        assert joined.num_vertices == 7
        assert joined.num_edges == 11
        assert is_four_critical(joined).is_four_critical

    def test_join_is_deterministic(self, k4):
        assert assemble(k4, (0, 1), W5, (5, 2)) == assemble(k4, (0, 1), W5, (5, 2))

    def test_unknown_edge(self, k4):
        with pytest.raises(InvalidEdgeError):
            assemble(k4, (0, 1), W5, (0, 2))


class TestGeneration:
    def test_empty_pool(self, rng):
        with pytest.raises(ConfigurationError):
            build_instance([], 20, rng)

    def test_k4_seed_needs_permission(self):
        with pytest.raises(ConfigurationError):
            seed_witness_map(K4)
        assert seed_witness_map(K4, allow_near_cliques=True).shape == (6, 4)

    def test_target_four_is_k4_minus_edge(self):
        instance = build_instance([K4], 4, np.random.default_rng(1), allow_near_cliques=True)
        assert instance.graph.num_vertices == 4
        assert instance.graph.num_edges == 5
        assert instance.joins == 0
        assert validate_colouring(instance.graph, instance.colouring)

    def test_same_seed_same_instance(self):
        first = generate_instance(HARDNESS_SEEDS, 40, np.random.default_rng(7))
        second = generate_instance(HARDNESS_SEEDS, 40, np.random.default_rng(7))
        assert first == second

    def test_fifty_small_instances_carry_valid_certificates(self):
        rng = np.random.default_rng(99)
        for _ in range(50):
            instance = build_instance(HARDNESS_SEEDS, 12, rng)
            assert instance.graph.num_vertices <= 30
            assert validate_colouring(instance.graph, instance.colouring)
            assert has_near_four_clique(instance.graph) is None
            assert is_four_critical(instance.graph.with_edge(instance.removed_edge)).is_four_critical

    @pytest.mark.parametrize("target", [26, 100, 588])
    def test_reachable_target_is_hit_exactly(self, target):
        instance = build_instance(HARDNESS_SEEDS, target, np.random.default_rng(target))
        assert instance.graph.num_vertices == target
        assert validate_colouring(instance.graph, instance.colouring)

    def test_even_target_needs_even_seed(self):
        odd_only = [s for s in HARDNESS_SEEDS if s.num_vertices % 2]
        instance = build_instance(odd_only, 40, np.random.default_rng(0))
        assert instance.graph.num_vertices > 40
        assert instance.graph.num_vertices % 2 == 1

    def test_k4_pool_lands_on_multiples_of_three_plus_one(self):
        rng = np.random.default_rng(2)
        assert build_instance([K4], 10, rng, allow_near_cliques=True).graph.num_vertices == 10
        assert build_instance([K4], 5, rng, allow_near_cliques=True).graph.num_vertices == 7

    @pytest.mark.parametrize("seed", [3, 4, 5])
    def test_restored_edge_gives_four_critical_graph(self, seed):
        instance = build_instance(HARDNESS_SEEDS, 12, np.random.default_rng(seed))
        restored = instance.graph.with_edge(instance.removed_edge)
        assert restored == instance.critical_graph
        assert is_four_critical(restored).is_four_critical

    def test_hundred_vertex_instance(self, hundred_vertex_instance):
        g = hundred_vertex_instance.graph
        assert g.num_vertices >= 100
        assert validate_colouring(g, hundred_vertex_instance.colouring)
        assert has_near_four_clique(g) is None


class TestGraphFile:
    def test_bundled_demo_matches_code(self, demo):
        assert read_graph_file(INSTANCES / "demo.col") == demo

    def test_bundled_k4_has_no_certificate(self, k4):
        assert read_graph_file(INSTANCES / "k4.col") == (k4, None)

    def test_write_then_read(self, tmp_path, demo):
        g, c = demo
        path = tmp_path / "demo.col"
        write_graph_file(path, g, c, header=["# generated in a test"])
        text = path.read_text()
        assert text.startswith("# generated in a test\np edge 6 9\n")
        assert read_graph_file(path) == (g, c)

    def test_format_is_one_based(self, single_edge):
        assert format_graph_text(single_edge, Colouring((2, 0))) == "p edge 2 1\ne 1 2\nc 1 2\nc 2 0\n"

    def test_comment_lines_skipped(self):
        g, c = parse_graph_text("# manifest\n\np edge 2 1\n# note\ne 2 1\n")
        assert g.edges == ((0, 1),)
        assert c is None

    def test_error_names_line(self):
        with pytest.raises(GraphFormatError, match="line 2"):
            parse_graph_text("p edge 3 1\ne 1 4\n")

    def test_header_count_mismatch(self):
        with pytest.raises(GraphFormatError, match="declares 2 edges"):
            parse_graph_text("p edge 3 2\ne 1 2\n")

    def test_partial_colouring(self):
        with pytest.raises(GraphFormatError):
            parse_graph_text("p edge 3 1\ne 1 2\nc 1 0\n")

    def test_bad_colour(self):
        with pytest.raises(GraphFormatError, match="line 3"):
            parse_graph_text("p edge 2 1\ne 1 2\nc 1 5\nc 2 0\n")
