import itertools
import pickle

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import grid_from_rows
from oracles import RawGrid
from mapfsplit.grid import (
    GraphError, GridGraph, VertexSet, bfs_distances, graph_difference, graph_sum, neighbors,
)


def test_neighbors_interior_order():
    assert neighbors(GridGraph(3, 3), (2, 2)) == [(3, 2), (1, 2), (2, 3), (2, 1)]


def test_neighbors_corner():
    assert neighbors(GridGraph(3, 3), (1, 1)) == [(2, 1), (1, 2)]


def test_neighbors_obstacle():
    g = GridGraph.from_obstacles(3, 3, [(2, 1)])
    assert neighbors(g, (1, 1)) == [(1, 2)]


@pytest.mark.parametrize("v", [(0, 1), (4, 1), (1, 4), (2, 1)])
def test_neighbors_bad_vertex(v):
    g = GridGraph.from_obstacles(3, 3, [(2, 1)])
    with pytest.raises(GraphError):
        neighbors(g, v)


def test_bfs_corridor():
    assert bfs_distances(GridGraph(4, 1), (1, 1)).dist((4, 1)) == 3


def test_bfs_manhattan_open():
    assert bfs_distances(GridGraph(5, 5), (1, 1)).dist((5, 5)) == 8


def test_bfs_detour_around_wall():
    g = grid_from_rows(["...", "@@.", "..."])
    assert bfs_distances(g, (1, 1)).dist((1, 3)) == 6


def test_bfs_unreachable_is_none():
    g = grid_from_rows([".@.", ".@.", ".@."])
    df = bfs_distances(g, (1, 1))
    assert df.dist((3, 3)) is None
    assert df.array[g.index((3, 3))] == -1


def test_bfs_invalid_source():
    with pytest.raises(GraphError):
        bfs_distances(GridGraph.from_obstacles(2, 2, [(1, 1)]), (1, 1))


def test_undirected_and_vertex_set():
    g = grid_from_rows(["..@.", "....", ".@.."])
    for v in g.vertices():
        for u in g.neighbors(v):
            assert v in g.neighbors(u)
    assert g.num_vertices == 10
    assert len(list(g.vertices())) == 10


def _random_grid(seed, w, h, p=0.2):
    rng = np.random.default_rng(seed)
    return GridGraph(w, h, rng.random((h, w)) < p)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 9), st.integers(1, 9))
def test_distances_match_oracle_and_are_symmetric(seed, w, h):
    g = _random_grid(seed, w, h)
    raw = RawGrid.of(g)
    vs = list(g.vertices())
    for u in vs:
        ref = raw.bfs(u)
        du = g.distances(u)
        for v in vs:
            assert du.dist(v) == ref.get(v)
            assert du.dist(v) == g.distances(v).dist(u)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_triangle_inequality(seed):
    g = _random_grid(seed, 6, 5)
    vs = list(g.vertices())
    for a, b, c in itertools.product(vs[:8], vs[:8], vs[:8]):
        ab, bc, ac = g.dist(a, b), g.dist(b, c), g.dist(a, c)
        if None not in (ab, bc, ac):
            assert ac <= ab + bc


def test_open_grid_is_manhattan():
    g = GridGraph(7, 5)
    for u in [(1, 1), (4, 3), (7, 5)]:
        for v in g.vertices():
            assert g.dist(u, v) == abs(u[0] - v[0]) + abs(u[1] - v[1])


def test_graph_sum_halves():
    g = GridGraph(4, 4)
    left = VertexSet.rect(g, 1, 1, 2, 4)
    right = VertexSet.rect(g, 3, 1, 4, 4)
    assert graph_sum(left, right) == g.full_set()


def test_graph_sum_idempotent():
    g = GridGraph(4, 4)
    a = VertexSet.rect(g, 2, 2, 3, 4)
    assert graph_sum(a, a) == a


def test_graph_sum_singletons_gain_edge():
    g = GridGraph(4, 4)
    s = graph_sum(VertexSet.from_vertices(g, [(1, 1)]), VertexSet.from_vertices(g, [(2, 1)]))
    assert s.edges() == {((1, 1), (2, 1))}


def test_graph_sum_different_parents():
    with pytest.raises(GraphError):
        graph_sum(GridGraph(3, 3).full_set(), GridGraph(4, 3).full_set())


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 2**31), st.integers(0, 2**31))
def test_sum_algebra(sa, sb, sc):
    g = _random_grid(1, 6, 6, 0.15)
    mk = lambda s: VertexSet(g, np.random.default_rng(s).random((6, 6)) < 0.5)  # noqa: E731
    a, b, c = mk(sa), mk(sb), mk(sc)
    assert a + b == b + a
    assert (a + b) + c == a + (b + c)
    assert graph_difference(a + b, b) & a == a - b
    assert (graph_difference(a + b, b) + (a & b)) == a


def test_vertex_set_components_and_restriction():
    g = grid_from_rows(["..@..", "..@..", "....."])
    top = VertexSet.rect(g, 1, 2, 5, 3)
    comps = top.components()
    assert len(comps) == 2
    sub = top.as_graph()
    assert sub.dist((1, 3), (4, 3)) is None
    assert g.dist((1, 3), (4, 3)) == 7


def test_pickle_round_trip_keeps_graph():
    g = _random_grid(3, 8, 6)
    g.distances(next(iter(g.vertices())))
    g2 = pickle.loads(pickle.dumps(g))
    assert g2 == g and hash(g2) == hash(g)
