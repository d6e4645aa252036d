"""Shuffle null models and the clusterability significance test.

A network is *relatively clusterable* when its spectral n-cut is lower than
that of matched random controls. Three controls are supported:

- ``layer``: permute all weights within each dense layer of an archive;
- ``layer_nonzero``: permute only the nonzero weights within each dense
  layer, preserving zero positions (fair to pruned networks);
- ``graph_edges``: permute edge weights within each adjacent-layer block of
  an already-built graph (the control used for channel graphs).

The one-sided empirical p-value is (r + 1) / (n + 1), where r counts
shuffles whose n-cut is less than or equal to the observed one (ties count
toward r).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ._rng import STREAM_SHUFFLE, child_rng
from .archive import ArchiveBuilder, WeightArchive
from .graph import GraphBuildError, WeightedGraph, cnn_to_graph, mlp_to_graph, strip_dead_nodes
from .spectral import Partition, SpectralConfig, ncut, spectral_cluster

SHUFFLE_METHODS = ("layer", "layer_nonzero", "graph_edges")


@dataclass
class ShuffleReport:
    """Outcome of one shuffle significance test.

    ``n_shuffles`` counts the shuffles that produced a usable graph and
    equals ``len(shuffle_ncuts)``; ``excluded_shuffles`` counts the rest.
    ``z_score`` is NaN when the shuffle sample has zero spread.
    """

    method: str
    observed_ncut: float
    shuffle_ncuts: list[float]
    n_shuffles: int
    p_value: float
    z_score: float
    config: SpectralConfig
    observed_degenerate: bool = False
    degenerate_shuffles: list[int] = field(default_factory=list)
    excluded_shuffles: int = 0

    def recompute_p_value(self) -> float:
        """(r + 1) / (n + 1) from the stored sample; ties count toward r."""
        r = sum(1 for v in self.shuffle_ncuts if v <= self.observed_ncut)
        return (r + 1) / (len(self.shuffle_ncuts) + 1)


def _rebuild(archive: WeightArchive, new_weights: list[np.ndarray]) -> WeightArchive:
    b = ArchiveBuilder()
    for i, layer in enumerate(archive.layers):
        bn = None
        if layer.batchnorm is not None:
            bn = (archive.layer_gamma(i), archive.layer_moving_variance(i),
                  layer.batchnorm.epsilon)
        b.add_dense(layer.name, new_weights[i], bias=archive.layer_bias(i), batchnorm=bn)
    return b.build()


def _require_dense(archive: WeightArchive, what: str) -> None:
    if not isinstance(archive, WeightArchive):
        raise ValueError(f"{what} operates on a WeightArchive, got {type(archive).__name__}")
    if not archive.all_dense():
        raise ValueError(f"{what} is defined for dense layers only")


def shuffle_layer_weights(archive: WeightArchive, seed: int) -> WeightArchive:
    """Permute every weight within each dense layer; biases untouched."""
    _require_dense(archive, "layer shuffle")
    rng = child_rng(seed, STREAM_SHUFFLE)
    shuffled = []
    for i in range(len(archive.layers)):
        w = archive.layer_weights(i)
        shuffled.append(rng.permutation(w.ravel()).reshape(w.shape))
    return _rebuild(archive, shuffled)


def shuffle_nonzero(archive: WeightArchive, seed: int) -> WeightArchive:
    """Permute nonzero weights within each dense layer; zeros stay in place."""
    _require_dense(archive, "nonzero shuffle")
    rng = child_rng(seed, STREAM_SHUFFLE)
    shuffled = []
    for i in range(len(archive.layers)):
        w = archive.layer_weights(i).copy()
        flat = w.ravel()
        nz = np.flatnonzero(flat)
        flat[nz] = rng.permutation(flat[nz])
        shuffled.append(w)
    return _rebuild(archive, shuffled)


def shuffle_graph_edges(graph: WeightedGraph, seed: int) -> WeightedGraph:
    """Permute edge weights within each adjacent-layer block of a graph.

    Keeps every node id and the total weight of each block; node degrees
    generally change, so the result may need strip_dead_nodes. Requires a
    layered graph (every edge between consecutive layer indices).
    """
    groups = graph.layer_node_indices()
    layer_of = np.array([n.layer for n in graph.nodes])
    coo = graph.adjacency.tocoo()
    if coo.nnz and (np.abs(layer_of[coo.row] - layer_of[coo.col]) != 1).any():
        raise ValueError("edge shuffles require a layered graph "
                         "(all edges between consecutive layers)")

    rng = child_rng(seed, STREAM_SHUFFLE)
    n = graph.n_nodes
    rows, cols, vals = [], [], []
    for layer in sorted(groups):
        if layer + 1 not in groups:
            continue
        ix, jx = groups[layer], groups[layer + 1]
        block = graph.adjacency[ix][:, jx].toarray()
        flat = rng.permutation(block.ravel()).reshape(block.shape)
        r, c = np.nonzero(flat)
        rows.append(ix[r])
        cols.append(jx[c])
        vals.append(flat[r, c])

    if rows:
        upper = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        adjacency = (upper + upper.T).tocsr()
    else:
        adjacency = sp.csr_matrix((n, n))
    return WeightedGraph(adjacency, graph.nodes)


def _observed_graph(source, method: str) -> WeightedGraph:
    if isinstance(source, WeightArchive):
        graph = mlp_to_graph(source) if source.all_dense() else cnn_to_graph(source)
    elif isinstance(source, WeightedGraph):
        if method in ("layer", "layer_nonzero"):
            raise ValueError(f"method {method!r} shuffles archive weights; "
                             "pass a WeightArchive")
        graph = strip_dead_nodes(source)
    else:
        raise ValueError(f"source must be WeightArchive or WeightedGraph, "
                         f"got {type(source).__name__}")
    return graph


def _child_seed(seed: int, index: int) -> int:
    state = np.random.SeedSequence(entropy=[int(seed), STREAM_SHUFFLE, index]).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


def _one_shuffle(args) -> tuple[float, bool] | None:
    """Evaluate one shuffle replica; None when the shuffled graph is empty."""
    source, graph, method, config, replica_seed = args
    try:
        if method == "layer":
            g = mlp_to_graph(shuffle_layer_weights(source, replica_seed))
        elif method == "layer_nonzero":
            g = mlp_to_graph(shuffle_nonzero(source, replica_seed))
        else:
            g = strip_dead_nodes(shuffle_graph_edges(graph, replica_seed))
            if g.n_nodes == 0:
                return None
        partition = spectral_cluster(g, config)
        return ncut(g, partition), partition.is_degenerate
    except GraphBuildError:
        return None


def run_shuffle_test(source, method: str, n_shuffles: int,
                     config: SpectralConfig = SpectralConfig(), seed: int = 0,
                     jobs: int = 1) -> ShuffleReport:
    """Cluster ``source``, cluster ``n_shuffles`` shuffled controls, compare.

    ``source`` is a WeightArchive (dense archives build MLP graphs, archives
    with conv layers build channel graphs) or an already-built WeightedGraph
    (``graph_edges`` only). Every replica gets an independent seed derived
    from (seed, replica index), so results do not depend on ``jobs``.
    """
    if method not in SHUFFLE_METHODS:
        raise ValueError(f"unknown method {method!r}, expected one of {SHUFFLE_METHODS}")
    if n_shuffles < 1:
        raise ValueError(f"n_shuffles must be positive, got {n_shuffles}")
    if method in ("layer", "layer_nonzero"):
        _require_dense(source, f"{method} shuffle")

    graph = _observed_graph(source, method)
    observed_partition = spectral_cluster(graph, config)
    observed = ncut(graph, observed_partition)

    tasks = [
        (source if isinstance(source, WeightArchive) else None,
         graph, method, config, _child_seed(seed, i))
        for i in range(n_shuffles)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, n_shuffles)) as pool:
            results = list(pool.map(_one_shuffle, tasks))
    else:
        results = [_one_shuffle(t) for t in tasks]

    ncuts = [r[0] for r in results if r is not None]
    degenerate = [i for i, r in enumerate(results) if r is not None and r[1]]
    excluded = sum(1 for r in results if r is None)

    r_count = sum(1 for v in ncuts if v <= observed)
    p_value = (r_count + 1) / (len(ncuts) + 1)
    if len(ncuts) >= 2 and np.std(ncuts, ddof=1) > 0:
        z = (observed - np.mean(ncuts)) / np.std(ncuts, ddof=1)
    else:
        z = float("nan")

    return ShuffleReport(
        method=method,
        observed_ncut=float(observed),
        shuffle_ncuts=[float(v) for v in ncuts],
        n_shuffles=len(ncuts),
        p_value=p_value,
        z_score=float(z),
        config=config,
        observed_degenerate=observed_partition.is_degenerate,
        degenerate_shuffles=degenerate,
        excluded_shuffles=excluded,
    )
