import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infmax_attack.graph_core import (
    GraphError,
    build_graph,
    full_power,
    influence_columns,
    k_hop_neighbors,
    transition_matrix,
)

from conftest import dense_walk, random_graph


def test_dedup_and_symmetry():
    g = build_graph([("a", "b"), ("b", "a"), ("b", "c")])
    assert g.n_nodes == 3
    assert g.n_edges == 2
    assert (g.adj != g.adj.T).nnz == 0
    assert g.node_ids == ("a", "b", "c")


def test_triangle_neighborhoods():
    g = build_graph([(0, 1), (1, 2), (0, 2)])
    assert g.degrees.tolist() == [2, 2, 2]
    assert g.neighborhood_sizes.tolist() == [3, 3, 3]


def test_self_loops_not_stored():
    g = build_graph([(0, 0), (0, 1)])
    assert g.adj.diagonal().sum() == 0
    assert g.n_edges == 1


def test_duplicate_pairs_counted_once(rng):
    n = 100
    iu, ju = np.triu_indices(n, k=1)
    pick = rng.choice(len(iu), size=150, replace=False)
    edges = [(int(iu[k]), int(ju[k])) for k in pick]
    dup = [edges[3][::-1], edges[10], edges[42][::-1]]
    g = build_graph(edges + dup, nodes=range(n))
    brute = {frozenset(e) for e in edges + dup}
    assert g.n_edges == len(brute) == 150


def test_rejects_mismatched_features():
    with pytest.raises(GraphError, match="feature rows"):
        build_graph([(0, 1)], features=np.zeros((3, 2)))
    with pytest.raises(GraphError, match="label count"):
        build_graph([(0, 1)], labels=[0, 1, 1])


def test_rejects_unknown_node_with_keyed_features():
    feats = {0: [1.0], 1: [2.0]}
    with pytest.raises(GraphError, match="unknown node 2"):
        build_graph([(0, 1), (1, 2)], features=feats)


def test_isolated_node_from_explicit_node_list():
    g = build_graph([(0, 1)], nodes=[0, 1, 2])
    m = transition_matrix(g).toarray()
    assert m[2].tolist() == [0.0, 0.0, 1.0]


def test_transition_examples():
    tri = transition_matrix(build_graph([(0, 1), (1, 2), (0, 2)])).toarray()
    np.testing.assert_allclose(tri, np.full((3, 3), 1 / 3), rtol=0, atol=1e-15)
    path = transition_matrix(build_graph([("a", "b")])).toarray()
    np.testing.assert_allclose(path, np.full((2, 2), 0.5))
    star = build_graph([("c", f"l{k}") for k in range(4)])
    m = transition_matrix(star).toarray()
    c, leaf = star.index_of("c"), star.index_of("l0")
    assert m[c, leaf] == pytest.approx(1 / 5)
    assert m[leaf, c] == pytest.approx(1 / 2)


def test_influence_examples():
    tri = build_graph([(0, 1), (1, 2), (0, 2)])
    col = influence_columns(transition_matrix(tri), [1], 4).column(1)
    np.testing.assert_allclose(col, [1 / 3] * 3, atol=1e-15)
    path = build_graph([("a", "b")])
    col = influence_columns(transition_matrix(path), [0], 2).column(0)
    np.testing.assert_allclose(col, [0.5, 0.5], atol=1e-15)


def test_influence_matches_dense_cube(rng):
    g = random_graph(rng, 20, 0.2)
    m = transition_matrix(g)
    B = influence_columns(m, range(20), 3).matrix(list(range(20)))
    dense = np.linalg.matrix_power(dense_walk(g), 3)
    assert np.max(np.abs(B - dense)) <= 1e-12


def test_column_is_repeated_application(rng):
    g = random_graph(rng, 15, 0.3)
    m = transition_matrix(g).matrix
    v = np.zeros(15)
    v[4] = 1.0
    for _ in range(5):
        v = m @ v
    np.testing.assert_array_equal(influence_columns(transition_matrix(g), [4], 5).column(4), v)


def test_empty_candidates():
    g = build_graph([(0, 1)])
    inf = influence_columns(transition_matrix(g), [], 3)
    assert inf.matrix([]).shape == (2, 0)
    np.testing.assert_array_equal(inf.influence([]), np.zeros(2))


def test_missing_column_rejected():
    g = build_graph([(0, 1), (1, 2)])
    inf = influence_columns(transition_matrix(g), [0], 2)
    with pytest.raises(KeyError):
        inf.column(2)


def test_k_hop():
    g = build_graph([(0, 1), (1, 2), (2, 3)])
    # the source itself counts as within k hops
    assert k_hop_neighbors(g, 0, 1) == {0, 1}
    assert k_hop_neighbors(g, 0, 2) == {0, 1, 2}
    assert k_hop_neighbors(g, 3, 0) == {3}


@st.composite
def graphs(draw, max_n=50):
    n = draw(st.integers(1, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    p = draw(st.floats(0.0, 0.6))
    return random_graph(np.random.default_rng(seed), n, p)


@settings(max_examples=40, deadline=None)
@given(graphs(), st.integers(1, 6))
def test_powers_stay_stochastic(g, L):
    m = transition_matrix(g)
    rows = np.asarray(m.matrix.sum(axis=1)).ravel()
    assert np.max(np.abs(rows - 1.0)) <= 1e-12
    B = full_power(m, L)
    assert B.min() >= 0
    assert B.max() <= 1 + 1e-12
    dense = np.linalg.matrix_power(dense_walk(g), L)
    # summing column j over start nodes reproduces the dense column sums
    np.testing.assert_allclose(B.sum(axis=0), dense.sum(axis=0), rtol=0, atol=1e-10)
    assert np.all(B.sum(axis=0) <= g.n_nodes + 1e-9)


@settings(max_examples=20, deadline=None)
@given(graphs(max_n=25), st.integers(1, 5))
def test_columns_deterministic(g, L):
    a = full_power(transition_matrix(g), L)
    b = full_power(transition_matrix(g), L)
    assert a.tobytes() == b.tobytes()


def test_permuted_graph_relabels(rng):
    g = random_graph(rng, 12, 0.3)
    perm = rng.permutation(12)
    h = g.permuted(perm)
    Bg = full_power(transition_matrix(g), 3)
    Bh = full_power(transition_matrix(h), 3)
    np.testing.assert_allclose(Bh, Bg[np.ix_(perm, perm)], atol=1e-14)
