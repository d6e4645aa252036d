"""Normalized spectral clustering, n-cut, and the exhaustive minimizer."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nncluster.graph import WeightedGraph
from nncluster.spectral import (
    EigensolverError,
    Partition,
    SpectralConfig,
    brute_force_min_ncut,
    kmeans,
    ncut,
    ncut_stub_estimate,
    normalized_laplacian,
    smallest_eigenpairs,
    spectral_cluster,
)

from oracles import exact_partitions, ncut_direct


def path_graph():
    # a -1- b -0.5- c -1- d
    a = np.zeros((4, 4))
    a[0, 1] = a[1, 0] = 1.0
    a[1, 2] = a[2, 1] = 0.5
    a[2, 3] = a[3, 2] = 1.0
    return WeightedGraph.from_dense(a)


def two_cliques(bridge=0.1):
    a = np.zeros((8, 8))
    for block in (range(4), range(4, 8)):
        for i in block:
            for j in block:
                if i != j:
                    a[i, j] = 1.0
    a[0, 4] = a[4, 0] = bridge
    return WeightedGraph.from_dense(a)


def random_graph(rng, n, density=0.6):
    """Connected-ish random graph with positive weights, no dead nodes."""
    while True:
        a = rng.uniform(0.1, 2.0, size=(n, n))
        a *= rng.random((n, n)) < density
        a = np.triu(a, 1)
        a = a + a.T
        g = WeightedGraph.from_dense(a)
        if g.n_nodes and g.degrees.min() > 0:
            return g


# -- Partition ---------------------------------------------------------------

def test_partition_validates_labels():
    with pytest.raises(ValueError):
        Partition(np.array([0, 1, 2]), k=2)
    with pytest.raises(ValueError):
        Partition(np.array([0, -1]), k=2)
    p = Partition(np.array([0, 0, 1]), k=3)
    assert p.cluster_sizes().tolist() == [2, 1, 0]
    assert p.empty_clusters() == [2]
    assert p.is_degenerate


# -- n-cut -------------------------------------------------------------------

def test_ncut_worked_example():
    g = path_graph()
    p = Partition(np.array([0, 0, 1, 1]), k=2)
    assert ncut(g, p) == pytest.approx(0.4, abs=1e-15)


def test_ncut_whole_graph_is_zero():
    g = path_graph()
    assert ncut(g, Partition(np.zeros(4, dtype=int), k=1)) == 0.0


def test_ncut_range_and_empty_cluster_skipped():
    g = path_graph()
    p = Partition(np.array([0, 0, 1, 1]), k=3)  # cluster 2 empty
    v = ncut(g, p)
    assert v == pytest.approx(0.4, abs=1e-15)
    assert 0.0 <= v <= 3.0


def test_ncut_matches_direct_oracle_randomized():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = rng.integers(3, 9)
        g = random_graph(rng, int(n))
        k = int(rng.integers(1, 4))
        labels = rng.integers(0, k, size=g.n_nodes)
        expected = ncut_direct(g.adjacency.toarray(), labels, k)
        assert ncut(g, Partition(labels, k)) == pytest.approx(expected, abs=1e-12)


def test_ncut_rejects_zero_degree_nodes():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1.0
    g = WeightedGraph.from_dense(a)  # node 2 dead
    with pytest.raises(ValueError):
        ncut(g, Partition(np.array([0, 0, 1]), k=2))


# -- Laplacians and eigenpairs -------------------------------------------------

def test_normalized_laplacian_single_edge():
    a = np.zeros((2, 2))
    a[0, 1] = a[1, 0] = 3.0
    l_norm, l_sym = normalized_laplacian(WeightedGraph.from_dense(a))
    np.testing.assert_array_equal(l_norm.toarray(), [[1.0, -1.0], [-1.0, 1.0]])
    np.testing.assert_allclose(l_sym.toarray(), [[1.0, -1.0], [-1.0, 1.0]], atol=1e-15)


def test_l_sym_is_exactly_symmetric():
    g = random_graph(np.random.default_rng(3), 12)
    _, l_sym = normalized_laplacian(g)
    d = l_sym.toarray()
    np.testing.assert_array_equal(d, d.T)


def test_eigenpairs_residual_and_range():
    g = random_graph(np.random.default_rng(5), 20)
    vals, vecs = smallest_eigenpairs(g, 6)
    l_norm, _ = normalized_laplacian(g)
    for j in range(6):
        u = vecs[:, j]
        res = np.linalg.norm(l_norm @ u - vals[j] * u)
        assert res <= 1e-8 * np.linalg.norm(u)
    assert vals[0] == pytest.approx(0.0, abs=1e-10)
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.all(vals >= -1e-10) and np.all(vals <= 2 + 1e-10)


def test_disconnected_components_give_zero_multiplicity():
    a = np.zeros((6, 6))
    for i, j in [(0, 1), (1, 2), (3, 4), (4, 5)]:
        a[i, j] = a[j, i] = 1.0
    vals, _ = smallest_eigenpairs(WeightedGraph.from_dense(a), 3)
    assert vals[0] == pytest.approx(0.0, abs=1e-12)
    assert vals[1] == pytest.approx(0.0, abs=1e-12)
    assert vals[2] > 1e-6


def test_sparse_path_matches_dense_on_ring():
    # ring of n nodes: L_sym eigenvalues are 1 - cos(2 pi j / n)
    n = 2100  # above the dense cutoff, exercises the iterative solver
    rows = np.arange(n)
    cols = (rows + 1) % n
    a = np.zeros((n, n))
    a[rows, cols] = 1.0
    a[cols, rows] = 1.0
    g = WeightedGraph.from_dense(a)
    vals, vecs = smallest_eigenpairs(g, 4)
    js = np.array([0, 1, 1, 2])
    expected = np.sort(1 - np.cos(2 * np.pi * js / n))
    np.testing.assert_allclose(vals, expected, atol=1e-8)
    l_norm, _ = normalized_laplacian(g)
    res = np.linalg.norm(l_norm @ vecs - vecs * vals, axis=0)
    assert res.max() < 1e-7


def test_eigenpairs_requires_positive_degrees():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1.0
    with pytest.raises(ValueError):
        smallest_eigenpairs(WeightedGraph.from_dense(a), 2)


# -- k-means -------------------------------------------------------------------

def test_kmeans_separated_blobs():
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.normal(0, 0.05, (20, 2)), rng.normal(5, 0.05, (20, 2))])
    labels, obj = kmeans(pts, 2, restarts=5, seed=0)
    assert len(set(labels[:20])) == 1
    assert len(set(labels[20:])) == 1
    assert labels[0] != labels[20]
    assert obj == pytest.approx(
        sum(
            np.sum((pts[labels == c] - pts[labels == c].mean(axis=0)) ** 2)
            for c in (0, 1)
        )
    )


def test_kmeans_identical_points_deterministic():
    pts = np.ones((7, 3))
    labels1, obj1 = kmeans(pts, 2, restarts=3, seed=1)
    labels2, obj2 = kmeans(pts, 2, restarts=3, seed=1)
    assert obj1 == 0.0
    np.testing.assert_array_equal(labels1, labels2)


def test_kmeans_requires_enough_points():
    with pytest.raises(ValueError):
        kmeans(np.ones((2, 2)), 3, restarts=1, seed=0)


def test_kmeans_more_restarts_never_worse():
    rng = np.random.default_rng(42)
    pts = rng.normal(size=(40, 3))
    _, obj1 = kmeans(pts, 4, restarts=1, seed=9)
    _, obj10 = kmeans(pts, 4, restarts=10, seed=9)
    assert obj10 <= obj1 + 1e-12


# -- spectral_cluster ----------------------------------------------------------

def test_two_cliques_recovered_exactly():
    g = two_cliques(bridge=0.1)
    p = spectral_cluster(g, SpectralConfig(k=2, seed=0))
    assert not p.is_degenerate
    left = {i for i in range(8) if p.labels[i] == p.labels[0]}
    assert left in ({0, 1, 2, 3}, {4, 5, 6, 7})
    expected = 2 * (0.1 / (12 + 0.1))
    assert ncut(g, p) == pytest.approx(expected, abs=1e-12)


def test_spectral_cluster_deterministic():
    g = random_graph(np.random.default_rng(11), 30)
    cfg = SpectralConfig(k=4, seed=3)
    p1 = spectral_cluster(g, cfg)
    p2 = spectral_cluster(g, cfg)
    assert p1 == p2


def test_spectral_cluster_requires_more_nodes_than_k():
    g = random_graph(np.random.default_rng(1), 5)
    with pytest.raises(ValueError):
        spectral_cluster(g, SpectralConfig(k=5))


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.25, 8.0))
def test_spectral_cluster_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, 14)
    scaled = WeightedGraph(g.adjacency * scale, g.nodes)
    cfg = SpectralConfig(k=3, seed=0, kmeans_restarts=4)
    p1 = spectral_cluster(g, cfg)
    p2 = spectral_cluster(scaled, cfg)
    np.testing.assert_array_equal(p1.labels, p2.labels)


# -- stub sampler ----------------------------------------------------------------

def test_stub_estimate_zero_when_partition_follows_components():
    a = np.zeros((6, 6))
    for i, j in [(0, 1), (1, 2), (3, 4), (4, 5)]:
        a[i, j] = a[j, i] = 2.0
    g = WeightedGraph.from_dense(a)
    p = Partition(np.array([0, 0, 0, 1, 1, 1]), k=2)
    assert ncut_stub_estimate(g, p, samples=5000, seed=0) == 0.0


def test_stub_estimate_matches_expectation():
    g = path_graph()
    p = Partition(np.array([0, 0, 1, 1]), k=2)
    est = ncut_stub_estimate(g, p, samples=20000, seed=2)
    # failure probability = ncut / k = 0.2; 4 standard errors
    se = np.sqrt(0.2 * 0.8 / 20000)
    assert abs(est - 0.2) < 4 * se


def test_stub_estimate_rejects_empty_cluster():
    g = path_graph()
    p = Partition(np.array([0, 0, 1, 1]), k=3)
    with pytest.raises(ValueError):
        ncut_stub_estimate(g, p, samples=100, seed=0)


# -- exhaustive minimum -----------------------------------------------------------

def test_brute_force_matches_itertools_oracle():
    rng = np.random.default_rng(17)
    for n, k in [(5, 2), (6, 2), (6, 3)]:
        g = random_graph(rng, n)
        part, value = brute_force_min_ncut(g, k)
        a = g.adjacency.toarray()
        oracle = min(ncut_direct(a, labels, k) for labels in exact_partitions(n, k))
        assert value == pytest.approx(oracle, abs=1e-12)
        assert ncut(g, part) == pytest.approx(value, abs=1e-12)
        assert not part.is_degenerate


def test_brute_force_caps_node_count():
    g = random_graph(np.random.default_rng(0), 13)
    with pytest.raises(ValueError):
        brute_force_min_ncut(g, 2)


def test_brute_force_is_lower_bound_for_spectral():
    rng = np.random.default_rng(23)
    for _ in range(5):
        g = random_graph(rng, 9)
        k = int(rng.integers(2, 4))
        _, best = brute_force_min_ncut(g, k)
        p = spectral_cluster(g, SpectralConfig(k=k, seed=0))
        assert ncut(g, p) >= best - 1e-9
