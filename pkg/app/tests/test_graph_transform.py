"""
File contains tests for graph_transform file.
"""

import numpy as np
import pytest

from app.backend.corpus import named_graph, random_admg
from app.backend.errors import GraphError, NotFixableError, QueryError
from app.backend.graph_core import CondADMG, DirectedMixedGraph, GraphClass, classify, parse_graph, serialize_graph
from app.backend.graph_transform import (
    UndirectedGraph,
    augment,
    enumerate_bidirected_cliques,
    expand_clique,
    expand_noise,
    expand_pairwise,
    find_fixable_order,
    fix_graph,
    fix_graph_sequence,
    fixable_permutations,
    fixable_sets,
    is_fixable,
    marginalize,
    swig,
    swig_labels,
    tilde_fix_graph,
    undirected_separated,
)
from app.backend.walk_algebra import SeparationQuery
from app.tests.conftest import repetitions


def clique_names(cliques: list) -> list[str]:
    return ["".join(v[1:] for v in c.members) for c in cliques]


def test_six_vertex_marginalization(six_vertex: DirectedMixedGraph) -> None:
    """
    Tests that removing V4 creates exactly the new bidirected edges of the clique example.
    :param six_vertex: six-vertex example
    :return: Nothing, only provides test.
    """
    projected = marginalize(six_vertex, ["V1", "V2", "V3", "V5", "V6"])
    assert projected == named_graph("six_vertex_projected")
    new_edges = projected.bidirected - six_vertex.bidirected
    assert new_edges == {
        frozenset({"V2", "V3"}),
        frozenset({"V2", "V6"}),
        frozenset({"V3", "V5"}),
        frozenset({"V3", "V6"}),
        frozenset({"V5", "V6"}),
    }


def test_six_vertex_clique_lists(six_vertex: DirectedMixedGraph) -> None:
    """
    Tests the clique lists before and after marginalization, in canonical order.
    :param six_vertex: six-vertex example
    :return: Nothing, only provides test.
    """
    expected = ["1", "2", "3", "4", "5", "6", "12", "13", "24", "45"]
    assert clique_names(enumerate_bidirected_cliques(six_vertex)) == expected
    assert clique_names(enumerate_bidirected_cliques(named_graph("six_vertex_projected"))) == (
        "1, 2, 3, 5, 6, 12, 13, 23, 26, 35, 36, 56, 123, 236, 356".split(", ")
    )


def test_maximal_cliques(mixed: DirectedMixedGraph) -> None:
    """
    Tests the maximal-clique restriction.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    assert [c.members for c in enumerate_bidirected_cliques(mixed, maximal=True)] == [("B",), ("A", "C"), ("C", "D")]


def test_marginalize_chain() -> None:
    """
    Tests that a removed middle vertex leaves a directed edge.
    :return: Nothing, only provides test.
    """
    chain = parse_graph("vertices: A B C\nA -> B\nB -> C")
    assert serialize_graph(marginalize(chain, ["A", "C"])) == "vertices: A C\nA -> C\n"
    fork = parse_graph("vertices: A B C\nB -> A\nB -> C")
    assert serialize_graph(marginalize(fork, ["A", "C"])) == "vertices: A C\nA <-> C\n"


def test_marginalize_mixed(mixed: DirectedMixedGraph) -> None:
    """
    Tests removing D from the running example.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    assert serialize_graph(marginalize(mixed, "ABC")) == "vertices: A B C\nA -> B\nB -> C\nA <-> C\n"


def test_marginalize_unknown_vertex(mixed: DirectedMixedGraph) -> None:
    """
    Tests that only vertices of the graph may be kept.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    with pytest.raises(GraphError):
        marginalize(mixed, ["A", "Z"])


def test_expansions_of_mixed(mixed: DirectedMixedGraph) -> None:
    """
    Tests the pairwise, clique and noise expansions of the running example.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    pairwise = expand_pairwise(mixed)
    assert pairwise.vertices == ("A", "B", "C", "D", "E_A_C", "E_C_D")
    assert {("E_A_C", "A"), ("E_A_C", "C"), ("E_C_D", "C"), ("E_C_D", "D")} <= pairwise.directed
    assert GraphClass.DAG in classify(pairwise)

    clique = expand_clique(mixed)
    assert clique.vertices[4:] == ("E_c0", "E_c1", "E_c2", "E_c3", "E_c4", "E_c5")
    assert {("E_c4", "A"), ("E_c4", "C"), ("E_c5", "C"), ("E_c5", "D")} <= clique.directed
    non_trivial = expand_clique(mixed, singletons=False)
    assert non_trivial.vertices[4:] == ("E_c0", "E_c1")

    noise = expand_noise(mixed)
    assert serialize_graph(noise) == (
        "vertices: A B C D E_A E_B E_C E_D\n"
        "A -> B\nB -> C\nB -> D\nE_A -> A\nE_B -> B\nE_C -> C\nE_D -> D\n"
        "E_A <-> E_C\nE_C <-> E_D\n"
    )
    assert classify(noise) == {GraphClass.ADMG, GraphClass.UNCONFOUNDED}


def test_latent_name_collision() -> None:
    """
    Tests that latent names may not reuse vertex labels.
    :return: Nothing, only provides test.
    """
    g = parse_graph("vertices: A E_A\nA <-> E_A")
    with pytest.raises(GraphError):
        expand_noise(g)


@pytest.mark.slow
def test_expansion_round_trip() -> None:
    """
    Tests that marginalizing every expansion onto the original vertices gives the graph back.
    :return: Nothing, only provides test.
    """
    rng = np.random.default_rng(11)
    for _ in range(repetitions(100, 20)):
        g = random_admg(rng, int(rng.integers(1, 6)))
        for expand in (expand_pairwise, expand_clique, expand_noise):
            assert marginalize(expand(g), g.vertices) == g
        assert marginalize(expand_clique(g, maximal=True), g.vertices) == g


def test_swig(mixed: DirectedMixedGraph) -> None:
    """
    Tests removal of outgoing edges and display labels.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    g = swig(mixed, {"B"})
    assert g.directed == {("A", "B")}
    assert g.bidirected == mixed.bidirected
    assert swig(mixed, set()) == mixed
    assert swig_labels(mixed, {"B"})["C"] == "C(b)"
    assert swig_labels(mixed, {"B"}, {"B": 1})["B"] == "B(B=1)"
    assert swig_labels(mixed, set())["A"] == "A"


def test_augment(mixed: DirectedMixedGraph) -> None:
    """
    Tests that the augmented graph of the running example is complete.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    u = augment(mixed)
    assert len(u.edges) == 6
    assert not undirected_separated(u, SeparationQuery(frozenset("A"), frozenset("D"), frozenset("BC")))
    assert u.serialize().splitlines()[1] == "A - B"


def test_undirected_separation() -> None:
    """
    Tests separation in a path graph.
    :return: Nothing, only provides test.
    """
    u = UndirectedGraph(("A", "B", "C"), frozenset({frozenset("AB"), frozenset("BC")}))
    assert undirected_separated(u, SeparationQuery(frozenset("A"), frozenset("C"), frozenset("B")))
    assert not undirected_separated(u, SeparationQuery(frozenset("A"), frozenset("C")))
    with pytest.raises(GraphError):
        UndirectedGraph(("A",), frozenset({frozenset("A")}))


def test_fixability(mixed: DirectedMixedGraph) -> None:
    """
    Tests the fixability rule and the fixed graph.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    assert not is_fixable(mixed, "A")
    assert is_fixable(mixed, "B")
    c = fix_graph(mixed, "B")
    assert c.fixed == {"B"}
    assert c.directed == {("B", "C"), ("B", "D")}
    assert c.bidirected == mixed.bidirected
    with pytest.raises(NotFixableError):
        fix_graph(mixed, "A")
    with pytest.raises(NotFixableError):
        is_fixable(c, "B")


def test_fixing_unlocks_vertex(mixed: DirectedMixedGraph) -> None:
    """
    Tests that A becomes fixable once C is fixed.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    c = fix_graph_sequence(mixed, ["C", "A"])
    assert isinstance(c, CondADMG)
    assert c.fixed == {"A", "C"}
    assert c.bidirected == frozenset()


def test_fixable_sets(mixed: DirectedMixedGraph) -> None:
    """
    Tests every fixable set of the running example with its first permutation.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    found = [("".join(sorted(s.members)), "".join(s.order)) for s in fixable_sets(mixed)]
    assert found == [
        ("", ""),
        ("B", "B"),
        ("C", "C"),
        ("D", "D"),
        ("AB", "BA"),
        ("AC", "CA"),
        ("BC", "BC"),
        ("BD", "BD"),
        ("CD", "CD"),
        ("ABC", "BAC"),
        ("ABD", "BAD"),
        ("ACD", "CAD"),
        ("BCD", "BCD"),
        ("ABCD", "BACD"),
    ]


def test_fixable_permutations(mixed: DirectedMixedGraph) -> None:
    """
    Tests listing every fixable permutation of a set.
    :param mixed: example graph
    :return: Nothing, only provides test.
    """
    assert fixable_permutations(mixed, {"B", "C"}) == [("B", "C"), ("C", "B")]
    assert fixable_permutations(mixed, {"A", "D"}) == []
    assert fixable_permutations(mixed, set()) == [()]
    assert find_fixable_order(mixed, {"A", "D"}) is None
    with pytest.raises(QueryError):
        fixable_permutations(fix_graph(mixed, "B"), {"B"})


def test_tilde_fix(mixed: DirectedMixedGraph, verma: DirectedMixedGraph) -> None:
    """
    Tests overlay edges of the tilde construction.
    :param mixed: example graph
    :param verma: Verma graph
    :return: Nothing, only provides test.
    """
    assert tilde_fix_graph(mixed, {"B"}).overlay == frozenset()
    c = tilde_fix_graph(verma, {"V1", "V3"})
    assert c.overlay == {frozenset({"V1", "V3"})}
    assert c.fixed == {"V1", "V3"}
    with pytest.raises(NotFixableError):
        tilde_fix_graph(mixed, {"A"})


@pytest.mark.slow
def test_marginalization_composes() -> None:
    """
    Tests that projecting onto K and then onto J equals projecting onto J directly.
    :return: Nothing, only provides test.
    """
    rng = np.random.default_rng(13)
    for _ in range(repetitions(100, 20)):
        g = random_admg(rng, int(rng.integers(1, 7)))
        K = [v for v in g.vertices if rng.random() < 0.7]
        J = [v for v in K if rng.random() < 0.7]
        assert marginalize(marginalize(g, K), J) == marginalize(g, J), (g, K, J)
