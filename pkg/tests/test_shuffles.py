"""Shuffle null models and the significance test harness."""

import numpy as np
import pytest

from nncluster.archive import ArchiveBuilder
from nncluster.graph import NodeId, WeightedGraph, mlp_to_graph, strip_dead_nodes
from nncluster.spectral import SpectralConfig, ncut, spectral_cluster
from nncluster.shuffles import (
    ShuffleReport,
    run_shuffle_test,
    shuffle_graph_edges,
    shuffle_layer_weights,
    shuffle_nonzero,
)

from helpers import make_planted_archive, random_dense_archive


def archive_of(*mats, biases=None):
    b = ArchiveBuilder()
    for i, m in enumerate(mats):
        bias = None if biases is None else biases[i]
        b.add_dense(f"fc{i}", np.asarray(m, dtype=np.float32), bias=bias)
    return b.build()


# -- layer shuffles -----------------------------------------------------------

def test_layer_shuffle_permutes_within_each_layer():
    a = random_dense_archive(seed=1, widths=(4, 5, 3))
    s = shuffle_layer_weights(a, seed=0)
    assert len(s.layers) == len(a.layers)
    for i in range(len(a.layers)):
        orig = np.sort(a.layer_weights(i), axis=None)
        perm = np.sort(s.layer_weights(i), axis=None)
        np.testing.assert_array_equal(orig, perm)
        assert s.layers[i].shape == a.layers[i].shape
    # some layer actually moved (holds for continuous weights and this seed)
    assert any(
        not np.array_equal(a.layer_weights(i), s.layer_weights(i))
        for i in range(len(a.layers))
    )


def test_layer_shuffle_preserves_biases_bitwise():
    rng = np.random.default_rng(3)
    biases = [rng.normal(size=3).astype(np.float32)]
    a = archive_of(rng.normal(size=(2, 3)), biases=biases)
    s = shuffle_layer_weights(a, seed=5)
    np.testing.assert_array_equal(s.layer_bias(0), biases[0])


def test_layer_shuffle_deterministic():
    a = random_dense_archive(seed=2)
    s1 = shuffle_layer_weights(a, seed=9)
    s2 = shuffle_layer_weights(a, seed=9)
    assert s1 == s2
    s3 = shuffle_layer_weights(a, seed=10)
    assert s3 != s1


def test_layer_shuffle_rejects_conv():
    b = ArchiveBuilder()
    b.add_conv2d("c0", np.ones((1, 1, 1, 1), dtype=np.float32))
    with pytest.raises(ValueError):
        shuffle_layer_weights(b.build(), seed=0)


def test_nonzero_shuffle_fixes_zero_positions():
    w = np.array([[0.0, 1.0, 0.0], [2.0, 0.0, 3.0]])
    a = archive_of(w)
    s = shuffle_nonzero(a, seed=4)
    sw = s.layer_weights(0)
    np.testing.assert_array_equal(sw == 0, w == 0)
    np.testing.assert_array_equal(np.sort(sw[sw != 0]), [1.0, 2.0, 3.0])


def test_nonzero_shuffle_on_fully_dense_layer_permutes_everything():
    a = random_dense_archive(seed=6, widths=(3, 4))
    s = shuffle_nonzero(a, seed=7)
    np.testing.assert_array_equal(
        np.sort(a.layer_weights(0), axis=None), np.sort(s.layer_weights(0), axis=None)
    )


# -- graph edge shuffles --------------------------------------------------------

def test_graph_edge_shuffle_preserves_block_weight():
    g = mlp_to_graph(random_dense_archive(seed=8, widths=(5, 6, 4)))
    s = shuffle_graph_edges(g, seed=0)
    assert s.nodes == g.nodes
    layers = g.layer_node_indices()
    for a, b in [(0, 1), (1, 2)]:
        orig = g.adjacency[layers[a]][:, layers[b]].sum()
        perm = s.adjacency[layers[a]][:, layers[b]].sum()
        assert perm == pytest.approx(orig, rel=1e-12)
    # total degree preserved, individual degrees generally not
    assert s.degrees.sum() == pytest.approx(g.degrees.sum(), rel=1e-12)


def test_graph_edge_shuffle_deterministic():
    g = mlp_to_graph(random_dense_archive(seed=9))
    s1 = shuffle_graph_edges(g, seed=3)
    s2 = shuffle_graph_edges(g, seed=3)
    np.testing.assert_array_equal(s1.adjacency.toarray(), s2.adjacency.toarray())


def test_graph_edge_shuffle_rejects_nonlayered_graph():
    a = np.zeros((3, 3))
    a[0, 1] = a[1, 0] = 1.0
    a[0, 2] = a[2, 0] = 1.0
    nodes = [NodeId(0, 0), NodeId(1, 0), NodeId(2, 0)]  # edge 0-2 skips a layer
    with pytest.raises(ValueError):
        shuffle_graph_edges(WeightedGraph.from_dense(a, nodes), seed=0)


# -- the test harness ------------------------------------------------------------

def test_planted_archive_gets_minimal_p_value():
    archive = make_planted_archive(seed=0)
    cfg = SpectralConfig(k=2, kmeans_restarts=5, seed=0)
    report = run_shuffle_test(archive, "layer", n_shuffles=10, config=cfg, seed=0)
    assert report.p_value == pytest.approx(1 / 11)
    assert report.n_shuffles == 10
    assert len(report.shuffle_ncuts) == 10
    assert report.observed_ncut < min(report.shuffle_ncuts)
    assert report.z_score < -1.0
    assert report.method == "layer"


def test_uniform_weights_give_p_one():
    # every permutation of constant layers is identical: r = n, p = 1
    a = archive_of(np.full((4, 4), 0.5), np.full((4, 4), 0.5))
    cfg = SpectralConfig(k=2, kmeans_restarts=3, seed=0)
    report = run_shuffle_test(a, "layer", n_shuffles=6, config=cfg, seed=1)
    assert report.p_value == 1.0
    assert np.isnan(report.z_score)
    assert report.shuffle_ncuts == pytest.approx([report.observed_ncut] * 6)


def test_harness_deterministic_and_parallel_consistent():
    archive = make_planted_archive(seed=1)
    cfg = SpectralConfig(k=2, kmeans_restarts=4, seed=0)
    r1 = run_shuffle_test(archive, "layer", n_shuffles=8, config=cfg, seed=7)
    r2 = run_shuffle_test(archive, "layer", n_shuffles=8, config=cfg, seed=7)
    assert r1.shuffle_ncuts == r2.shuffle_ncuts
    assert r1.p_value == r2.p_value
    r4 = run_shuffle_test(archive, "layer", n_shuffles=8, config=cfg, seed=7, jobs=4)
    assert r4.shuffle_ncuts == r1.shuffle_ncuts
    assert r4.p_value == r1.p_value


def test_harness_graph_edges_on_graph_input():
    g = strip_dead_nodes(mlp_to_graph(make_planted_archive(seed=2)))
    cfg = SpectralConfig(k=2, kmeans_restarts=4, seed=0)
    report = run_shuffle_test(g, "graph_edges", n_shuffles=8, config=cfg, seed=0)
    assert report.p_value == pytest.approx(1 / 9)
    assert report.observed_ncut == pytest.approx(
        ncut(g, spectral_cluster(g, cfg)), abs=1e-12
    )


def test_harness_nonzero_method_runs():
    archive = make_planted_archive(seed=3)
    cfg = SpectralConfig(k=2, kmeans_restarts=3, seed=0)
    report = run_shuffle_test(archive, "layer_nonzero", n_shuffles=5, config=cfg, seed=0)
    assert report.method == "layer_nonzero"
    assert report.p_value <= 2 / 6


def test_harness_validates_arguments():
    archive = make_planted_archive(seed=0)
    cfg = SpectralConfig(k=2)
    with pytest.raises(ValueError):
        run_shuffle_test(archive, "bogus", n_shuffles=5, config=cfg, seed=0)
    with pytest.raises(ValueError):
        run_shuffle_test(archive, "layer", n_shuffles=0, config=cfg, seed=0)
    g = mlp_to_graph(archive)
    with pytest.raises(ValueError):
        run_shuffle_test(g, "layer", n_shuffles=5, config=cfg, seed=0)


def test_p_value_counts_ties_conservatively():
    report = ShuffleReport(
        method="layer",
        observed_ncut=1.0,
        shuffle_ncuts=[1.0, 2.0, 0.5],
        n_shuffles=3,
        p_value=0.0,
        z_score=0.0,
        config=SpectralConfig(),
        observed_degenerate=False,
        degenerate_shuffles=[],
        excluded_shuffles=0,
    )
    # recompute: ranks {1.0 (tie), 0.5} count toward r -> p = (2+1)/(3+1)
    assert report.recompute_p_value() == pytest.approx(3 / 4)
