import itertools

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from vrjp_bench.graph import (
    Graph, GraphError, complete_graph, neighbors, path_graph, validate_strongly_connected,
)


def brute_force_bridges(n, edges):
    """An edge is a bridge iff deleting it disconnects its endpoints."""
    out = []
    for e in edges:
        rest = [f for f in edges if f != e]
        seen, todo = {e[0]}, [e[0]]
        while todo:
            u = todo.pop()
            for a, b in rest:
                for x, y in ((a, b), (b, a)):
                    if x == u and y not in seen:
                        seen.add(y)
                        todo.append(y)
        if e[1] not in seen:
            out.append(tuple(sorted(e)))
    return sorted(out)


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(2, 8))
    # random spanning tree keeps it connected, then sprinkle extra edges
    edges = set()
    for v in range(1, n):
        u = draw(st.integers(0, v - 1))
        edges.add((u, v))
    pairs = list(itertools.combinations(range(n), 2))
    extra = draw(st.lists(st.sampled_from(pairs), max_size=len(pairs)))
    edges |= set(extra)
    return n, sorted(edges)


def test_triangle_passes():
    assert validate_strongly_connected(complete_graph(3)).passed


def test_single_edge_reports_bridge():
    rep = validate_strongly_connected(Graph.from_edges(2, [(0, 1)]))
    assert not rep.passed
    assert rep.bridge == (0, 1)


def test_bowtie_passes():
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)])
    assert validate_strongly_connected(g).passed
    # exhaustive check: every edge lies on some simple cycle
    cyc = nx.cycle_basis(g.to_networkx())
    on_cycle = {tuple(sorted((c[k], c[(k + 1) % len(c)]))) for c in cyc for k in range(len(c))}
    assert on_cycle == set(g.edges)


@pytest.mark.parametrize("g, v, expected", [
    (complete_graph(3), 0, [1, 2]),
    (Graph.from_edges(2, [(0, 1)]), 1, [0]),
    (path_graph(3), 1, [0, 2]),
])
def test_neighbors_examples(g, v, expected):
    assert neighbors(g, v) == expected


@given(connected_graphs())
@settings(max_examples=200, deadline=None)
def test_bridge_detection_matches_brute_force(case):
    n, edges = case
    g = Graph.from_edges(n, edges)
    bridges = brute_force_bridges(n, edges)
    rep = validate_strongly_connected(g)
    assert rep.passed == (not bridges)
    if bridges:
        assert rep.bridge in bridges


@given(connected_graphs())
@settings(max_examples=100, deadline=None)
def test_neighbor_symmetry(case):
    n, edges = case
    g = Graph.from_edges(n, edges)
    for i in range(n):
        for j in range(n):
            assert (j in g.neighbors(i)) == (i in g.neighbors(j))


def test_default_weight_and_json():
    g = Graph.from_edges(3, [(0, 1), (1, 2, 2.5), (0, 2)])
    assert g.weight(1, 0) == 1.0
    assert g.weight(2, 1) == 2.5
    assert Graph.from_edges(3, [tuple(e) for e in g.to_json()["edges"]]) == g


@pytest.mark.parametrize("n, edges", [
    (2, [(0, 0)]),
    (2, [(0, 2)]),
    (3, [(0, 1)]),
    (2, [(0, 1, -1.0)]),
    (2, [(0, 1), (1, 0)]),
])
def test_rejects_bad_graphs(n, edges):
    with pytest.raises(GraphError):
        Graph.from_edges(n, edges)
