"""Undirected weighted graphs extracted from network weights.

An MLP maps to a graph with one node per neuron (input and output units
included) and an edge of weight |w| between units in adjacent layers. A
conv stack maps to a channel graph: one node per output channel of each
conv layer in the run, connected by the L1 norm of the kernel slice between
the two channels. Biases never enter the graph; batch norm is folded into
the outgoing slices of its layer's channels.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp


class GraphBuildError(ValueError):
    """Raised when an archive cannot be turned into a usable graph."""


class NodeId(NamedTuple):
    """Graph node identity: ``layer`` counts included layers from 0."""

    layer: int
    unit: int


class WeightedGraph:
    """Symmetric non-negative adjacency with per-node identities.

    ``degrees`` is the row sum of the adjacency. Zero-degree nodes are legal
    in transient graphs (input of :func:`strip_dead_nodes`); operations that
    need positive degrees check for themselves.
    """

    def __init__(self, adjacency: sp.spmatrix, nodes: Sequence[NodeId] | None = None):
        adjacency = sp.csr_matrix(adjacency, dtype=np.float64)
        n = adjacency.shape[0]
        if adjacency.shape != (n, n):
            raise ValueError(f"adjacency must be square, got {adjacency.shape}")
        if (adjacency != adjacency.T).nnz != 0:
            raise ValueError("adjacency must be symmetric")
        if adjacency.nnz and adjacency.data.min() < 0:
            raise ValueError("edge weights must be non-negative")
        if adjacency.diagonal().any():
            raise ValueError("self loops are not allowed")
        if nodes is None:
            nodes = tuple(NodeId(0, i) for i in range(n))
        else:
            nodes = tuple(nodes)
            if len(nodes) != n:
                raise ValueError(f"{len(nodes)} node ids for {n} adjacency rows")
        adjacency.eliminate_zeros()
        self.adjacency = adjacency
        self.nodes = nodes
        self.degrees = np.asarray(adjacency.sum(axis=1)).ravel()

    @classmethod
    def from_dense(cls, matrix: np.ndarray, nodes: Sequence[NodeId] | None = None) -> "WeightedGraph":
        return cls(sp.csr_matrix(np.asarray(matrix, dtype=np.float64)), nodes)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def volume(self, members: Iterable[int]) -> float:
        """Sum of degrees over the node indices in ``members``."""
        idx = np.fromiter(members, dtype=np.intp)
        return float(self.degrees[idx].sum())

    def cut_weight(self, members: Iterable[int]) -> float:
        """Total weight of edges leaving the node set ``members``."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[np.fromiter(members, dtype=np.intp)] = True
        inside = self.adjacency[mask][:, mask].sum()
        return float(self.degrees[mask].sum() - inside)

    def layer_node_indices(self) -> dict[int, np.ndarray]:
        """Node indices grouped by layer, in node order."""
        out: dict[int, list[int]] = {}
        for i, node in enumerate(self.nodes):
            out.setdefault(node.layer, []).append(i)
        return {layer: np.array(idx, dtype=np.intp) for layer, idx in out.items()}

    def __repr__(self) -> str:
        return f"WeightedGraph(n_nodes={self.n_nodes}, n_edges={self.adjacency.nnz // 2})"


def _graph_from_blocks(blocks: list[np.ndarray]) -> WeightedGraph:
    """Assemble a layered graph from bipartite blocks between layers s, s+1.

    ``blocks[s]`` has shape (units in layer s, units in layer s+1) and holds
    non-negative edge weights.
    """
    widths = [blocks[0].shape[0]] + [b.shape[1] for b in blocks]
    offsets = np.concatenate([[0], np.cumsum(widths)])
    n = int(offsets[-1])
    rows, cols, vals = [], [], []
    for s, block in enumerate(blocks):
        r, c = np.nonzero(block)
        rows.append(r + offsets[s])
        cols.append(c + offsets[s + 1])
        vals.append(block[r, c])
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals).astype(np.float64)
        upper = sp.coo_matrix((v, (r, c)), shape=(n, n))
        adjacency = (upper + upper.T).tocsr()
    else:
        adjacency = sp.csr_matrix((n, n))
    nodes = [NodeId(layer, unit) for layer, width in enumerate(widths) for unit in range(width)]
    return WeightedGraph(adjacency, nodes)


def strip_dead_nodes(graph: WeightedGraph) -> WeightedGraph:
    """Drop zero-degree nodes in one pass.

    Removing a zero-degree node cannot create new zero-degree nodes, so a
    single pass is exhaustive.
    """
    keep = graph.degrees > 0
    if keep.all():
        return graph
    idx = np.flatnonzero(keep)
    adjacency = graph.adjacency[idx][:, idx]
    return WeightedGraph(adjacency, [graph.nodes[i] for i in idx])


def mlp_to_graph(archive) -> WeightedGraph:
    """Neuron graph of an all-dense archive; dead nodes stripped.

    Layer 0 of the graph holds the network inputs; layer s holds the outputs
    of dense layer s-1.
    """
    if not archive.layers:
        raise GraphBuildError("archive has no layers")
    if not archive.all_dense():
        kinds = [l.kind for l in archive.layers]
        raise GraphBuildError(f"MLP graph requires dense layers only, got kinds {kinds}")
    blocks = [np.abs(np.asarray(archive.layer_weights(i), dtype=np.float64))
              for i in range(len(archive.layers))]
    graph = strip_dead_nodes(_graph_from_blocks(blocks))
    if graph.n_nodes == 0:
        raise GraphBuildError("resulting graph is empty (all nodes have zero degree)")
    return graph


def cnn_to_graph(archive) -> WeightedGraph:
    """Channel graph of the conv run in ``archive``; dead nodes stripped.

    Node (r, c) is output channel c of the r-th conv layer in the run. The
    edge between (r, a) and (r+1, b) is the L1 norm of kernel slice
    ``K[:, :, a, b]`` of the (r+1)-th conv layer, scaled by the batch norm
    folding factor |gamma_a| / sqrt(moving_variance_a + eps) when conv layer
    r carries batch norm. Non-conv layers around the run are ignored.
    """
    conv_idx = [i for i, l in enumerate(archive.layers) if l.kind == "conv2d"]
    if not conv_idx:
        raise GraphBuildError("archive contains no conv2d layers")
    if conv_idx[-1] - conv_idx[0] + 1 != len(conv_idx):
        raise GraphBuildError("conv2d layers must form one contiguous run")

    blocks = []
    for prev, nxt in zip(conv_idx, conv_idx[1:]):
        kernel = np.asarray(archive.layer_weights(nxt), dtype=np.float64)
        block = np.abs(kernel).sum(axis=(0, 1))  # (in_channels, out_channels)
        scale = archive.batchnorm_scale(prev)
        if scale is not None:
            block = block * np.asarray(scale, dtype=np.float64)[:, None]
        blocks.append(block)

    if not blocks:  # single conv layer: nodes but no edges
        raise GraphBuildError("resulting graph is empty (conv run has a single layer)")
    graph = strip_dead_nodes(_graph_from_blocks(blocks))
    if graph.n_nodes == 0:
        raise GraphBuildError("resulting graph is empty (all nodes have zero degree)")
    return graph
