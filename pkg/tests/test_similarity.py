import json
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_table
from selector.errors import DomainError
from selector.similarity import (
    SimilarityGraph,
    build_graph,
    connected_components,
    cosine_similarity,
    degree_statistics,
    export_degrees,
    export_graph,
    similarity_matrix,
)

vectors = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=8)


def test_cosine_identical():
    assert cosine_similarity([3.0, -2.0, 7.5], [3.0, -2.0, 7.5]) == 1.0


def test_cosine_orthogonal():
    assert cosine_similarity([1.0, 0.0], [0.0, 5.0]) == 0.0


def test_cosine_diagonal():
    assert cosine_similarity([1.0, 0.0], [1.0, 1.0]) == 0.7071067811865475


def test_cosine_zero_vector():
    with pytest.raises(DomainError):
        cosine_similarity([0.0, 0.0], [1.0, 1.0])


@settings(max_examples=100, deadline=None)
@given(vectors, st.floats(1e-3, 1e3))
def test_cosine_scale_invariance(a, c):
    a = np.array(a)
    if np.linalg.norm(a) < 1e-6:
        return
    assert cosine_similarity(a, c * a) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: st.tuples(
    st.lists(st.floats(-10, 10), min_size=n, max_size=n),
    st.lists(st.floats(-10, 10), min_size=n, max_size=n))))
def test_cosine_symmetric_and_bounded(pair):
    a, b = map(np.array, pair)
    if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
        return
    s = cosine_similarity(a, b)
    assert s == cosine_similarity(b, a)
    assert -1.0 <= s <= 1.0


def test_edgeless_above_one(rng):
    g = build_graph(make_table(rng.random((10, 4))), 1 + 1e-12)
    assert not g.edges


def test_identical_rows_one_edge():
    t = make_table([[0.1, 0.7, 0.3], [0.1, 0.7, 0.3]])
    for th in (1.0, 0.5, -1.0):
        assert build_graph(t, th).edges == {(0, 1)}


def test_zero_row_named():
    t = make_table([[1.0, 2.0], [0.0, 0.0]])
    with pytest.raises(DomainError, match="T_2_1"):
        build_graph(t, 0.9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 15), st.integers(0, 200))
def test_edge_iff_similarity_at_least_threshold(seed, n, pick):
    r = np.random.default_rng(seed)
    values = r.normal(size=(n, 3))
    values[r.integers(n)] = values[0]  # force an exact duplicate sometimes
    t = make_table(values)
    i, j = sorted(r.choice(n, 2, replace=False))
    th = cosine_similarity(values[i], values[j]) if pick % 2 else r.uniform(-1, 1)
    g = build_graph(t, th)
    for u in range(n):
        for v in range(u + 1, n):
            assert ((u, v) in g.edges) == (cosine_similarity(values[u], values[v]) >= th)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-1, 1), st.floats(-1, 1))
def test_threshold_monotone(seed, t1, t2):
    t1, t2 = sorted((t1, t2))
    tab = make_table(np.random.default_rng(seed).normal(size=(12, 4)))
    assert build_graph(tab, t2).edges <= build_graph(tab, t1).edges


def test_similarity_matrix_symmetric(rng):
    s = similarity_matrix(make_table(rng.normal(size=(20, 5))))
    assert np.array_equal(s, s.T)
    assert np.all(np.diag(s) == 1.0)


def test_rescale_option():
    t = make_table([[1.0, 100.0, 5.0], [2.0, 100.0, 1.0], [3.0, 300.0, 3.0]])
    assert (0, 1) in build_graph(t, 0.99).edges
    # rescaled rows are (0, 0, 1) and (0.5, 0, 0): orthogonal
    assert (0, 1) not in build_graph(t, 0.99, rescale=True).edges


def test_rescale_zero_row_rejected():
    t = make_table([[1.0, 100.0], [2.0, 200.0]])
    with pytest.raises(DomainError, match="T_1_1"):
        build_graph(t, 0.9, rescale=True)


def test_degrees_edgeless_and_complete():
    n = 6
    empty = degree_statistics(SimilarityGraph.from_edges(n, []))
    assert empty.degrees == (0,) * n
    full = degree_statistics(
        SimilarityGraph.from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])
    )
    assert full.degrees == (n - 1,) * n
    assert full.minimum == full.maximum == n - 1
    assert full.ecdf == ((n - 1, 1.0),)


def test_degree_ecdf_and_fraction():
    g = SimilarityGraph.from_edges(4, [(0, 1), (1, 2)])
    st_ = degree_statistics(g)
    assert st_.degrees == (1, 2, 1, 0)
    assert st_.ecdf == ((0, 0.25), (1, 0.75), (2, 1.0))
    assert st_.mean == 1.0
    assert st_.fraction_between(0, 2) == 0.5


def test_components_edgeless():
    comps = connected_components(SimilarityGraph.from_edges(5, []))
    assert comps == [frozenset({i}) for i in range(5)]


def test_components_path_plus_isolated():
    comps = connected_components(SimilarityGraph.from_edges(4, [(0, 1), (1, 2)]))
    assert comps == [frozenset({0, 1, 2}), frozenset({3})]


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.floats(0, 0.3), st.integers(0, 10_000))
def test_components_match_networkx(n, p, seed):
    r = np.random.default_rng(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if r.random() < p]
    comps = connected_components(SimilarityGraph.from_edges(n, edges))
    assert sum(len(c) for c in comps) == n
    assert set().union(*comps) == set(range(n))
    g = nx.Graph()
    g.add_nodes_from(range(n))
    g.add_edges_from(edges)
    assert {frozenset(c) for c in nx.connected_components(g)} == set(comps)
    sizes = [len(c) for c in comps]
    assert sizes == sorted(sizes, reverse=True)


def test_export_graph_and_degrees(tmp_path):
    t = make_table([[1.0, 0.0], [1.0, 0.1], [0.0, 1.0]])
    g = build_graph(t, 0.9)
    export_graph(g, tmp_path / "g.txt", {"seed": 1})
    lines = (tmp_path / "g.txt").read_text().splitlines()
    header = json.loads(lines[0])
    assert header["threshold"] == 0.9
    assert header["nodes"] == ["T_1_1", "T_2_1", "T_3_1"]
    assert header["config"] == {"seed": 1}
    u, v, sim = lines[1].split()
    assert (u, v) == ("T_1_1", "T_2_1")
    assert math.isclose(float(sim), 1 / math.sqrt(1.01), rel_tol=1e-15)
    export_degrees(g, tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines() == [
        "instance,degree", "T_1_1,1", "T_2_1,1", "T_3_1,0"
    ]


def test_self_loop_rejected():
    with pytest.raises(ValueError):
        SimilarityGraph.from_edges(3, [(1, 1)])
