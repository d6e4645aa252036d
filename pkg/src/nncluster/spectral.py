"""Normalized spectral clustering and the n-cut objective.

The pipeline follows the random-walk normalization: from the adjacency A and
degree matrix D form L = D - A, L_norm = D^-1 L and L_sym = D^-1/2 L D^-1/2.
The k eigenvectors of L_norm with smallest eigenvalues are obtained by
solving the symmetric problem on L_sym and mapping v -> D^-1/2 v; stacking
them as matrix rows gives one k-dimensional embedding point per node, which
k-means partitions into k clusters.

The n-cut of a partition X_1..X_k is sum_i W(X_i, comp(X_i)) / vol(X_i),
where W(X, Y) is the total weight between the node sets and vol(X) the total
degree inside X. It lies in [0, k]; drawing a random stub (edge endpoint)
within a uniformly chosen cluster crosses the boundary with probability
ncut / k, which `ncut_stub_estimate` simulates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from ._rng import STREAM_KMEANS, STREAM_STUB, child_rng
from .graph import WeightedGraph

# eigh below this node count, ARPACK at or above
DENSE_EIGENSOLVER_CUTOFF = 2000


class EigensolverError(RuntimeError):
    """Eigensolver failed to converge at the requested tolerance."""


class DegenerateEigenvalueError(RuntimeError):
    """A targeted eigenvalue is too close to its neighbors to differentiate."""


@dataclass(frozen=True)
class SpectralConfig:
    """Knobs for spectral_cluster; defaults suit desk-scale weight graphs."""

    k: int = 12
    kmeans_restarts: int = 10
    kmeans_max_iters: int = 300
    seed: int = 0
    eigensolver_tolerance: float = 1e-9


class Partition:
    """Assignment of each node to one of k clusters (labels 0..k-1).

    Clusters may be empty; consumers decide whether that is degenerate.
    """

    def __init__(self, labels, k: int):
        labels = np.asarray(labels, dtype=np.int64).copy()
        if labels.ndim != 1:
            raise ValueError(f"labels must be one-dimensional, got shape {labels.shape}")
        if k < 1:
            raise ValueError(f"k must be at least 1, got {k}")
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise ValueError(f"labels must lie in [0, {k}), got range "
                             f"[{labels.min()}, {labels.max()}]")
        labels.setflags(write=False)
        self.labels = labels
        self.k = int(k)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    def empty_clusters(self) -> list[int]:
        return np.flatnonzero(self.cluster_sizes() == 0).tolist()

    @property
    def is_degenerate(self) -> bool:
        return bool((self.cluster_sizes() == 0).any())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Partition)
            and self.k == other.k
            and np.array_equal(self.labels, other.labels)
        )

    def __repr__(self) -> str:
        return f"Partition(k={self.k}, sizes={self.cluster_sizes().tolist()})"


def _require_positive_degrees(graph: WeightedGraph) -> None:
    if graph.n_nodes == 0:
        raise ValueError("graph has no nodes")
    if graph.degrees.min() <= 0:
        raise ValueError("graph has zero-degree nodes; apply strip_dead_nodes first")


def normalized_laplacian(graph: WeightedGraph) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Return (L_norm, L_sym) as sparse matrices.

    L_sym is built so it is exactly symmetric in floating point; the two
    matrices share eigenvalues, with eigenvectors related by u = D^-1/2 v.
    """
    _require_positive_degrees(graph)
    a = graph.adjacency.tocoo()
    d = graph.degrees
    n = graph.n_nodes
    eye = sp.identity(n, format="coo")

    walk = sp.coo_matrix((a.data / d[a.row], (a.row, a.col)), shape=(n, n))
    l_norm = (eye - walk).tocsr()

    s = 1.0 / np.sqrt(d)
    sym = sp.coo_matrix((a.data * (s[a.row] * s[a.col]), (a.row, a.col)), shape=(n, n))
    l_sym = (eye - sym).tocsr()
    return l_norm, l_sym


def smallest_eigenpairs(graph: WeightedGraph, k: int, tolerance: float = 1e-9):
    """k smallest eigenvalues of L_norm and their eigenvectors.

    Returns (values ascending, vectors as columns of an (n, k) array). Solved
    on L_sym: dense LAPACK below DENSE_EIGENSOLVER_CUTOFF nodes, ARPACK on
    2I - L_sym above (the spectrum lies in [0, 2], so the smallest eigenvalues
    of L_sym are the largest of 2I - L_sym, where Lanczos converges fast).
    ARPACK runs at machine precision; asking it to stop at a loose tolerance
    makes it declare victory before deflation can expose repeated eigenvalues.
    ``tolerance`` is instead enforced as a residual guarantee on the result.
    Vector signs are fixed so the largest-magnitude entry is positive.
    """
    _require_positive_degrees(graph)
    n = graph.n_nodes
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got k={k}")
    _, l_sym = normalized_laplacian(graph)

    if n < DENSE_EIGENSOLVER_CUTOFF or k >= n - 1:
        vals, vecs = eigh(l_sym.toarray(), subset_by_index=[0, k - 1])
    else:
        shifted = (sp.identity(n) * 2.0 - l_sym).tocsr()
        # fixed but generic start vector: deterministic, and unlike a constant
        # vector it overlaps every eigenspace of structured graphs
        v0 = np.random.default_rng(0x5EED).standard_normal(n)
        try:
            svals, vecs = eigsh(shifted, k=k, which="LA", tol=0, v0=v0)
        except (ArpackNoConvergence, ArpackError) as exc:
            raise EigensolverError(f"eigensolver failed to converge: {exc}") from exc
        vals = 2.0 - svals
        order = np.argsort(vals, kind="stable")
        vals = vals[order]
        vecs = vecs[:, order]

    residuals = np.linalg.norm(l_sym @ vecs - vecs * vals, axis=0)
    if residuals.max() > max(tolerance, 64 * np.finfo(np.float64).eps * n):
        raise EigensolverError(
            f"eigenpair residual {residuals.max():.3e} exceeds tolerance {tolerance:.1e}")

    for j in range(k):
        col = vecs[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            vecs[:, j] = -col

    u = vecs / np.sqrt(graph.degrees)[:, None]
    return vals, u


def kmeans(points: np.ndarray, k: int, restarts: int = 10, max_iters: int = 300,
           seed: int = 0) -> tuple[np.ndarray, float]:
    """Lloyd's algorithm with greedy farthest-point seeding.

    Each restart draws its first center uniformly from the points (substream
    derived from (seed, restart index)) and picks the remaining centers
    greedily at maximal squared distance from those already chosen. Returns
    (labels, within-cluster sum of squares) of the best restart; ties keep
    the earliest restart. Deterministic given seed.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < k:
        raise ValueError(f"k-means needs at least k={k} points, got {n}")

    best_labels = None
    best_obj = np.inf
    for restart in range(restarts):
        rng = child_rng(seed, STREAM_KMEANS, restart)
        centers = np.empty((k, points.shape[1]))
        centers[0] = points[rng.integers(n)]
        min_d2 = ((points - centers[0]) ** 2).sum(axis=1)
        for j in range(1, k):
            centers[j] = points[int(np.argmax(min_d2))]
            min_d2 = np.minimum(min_d2, ((points - centers[j]) ** 2).sum(axis=1))

        labels = np.full(n, -1, dtype=np.int64)
        for _ in range(max_iters):
            d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = np.argmin(d2, axis=1)
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
            for c in range(k):
                mask = labels == c
                if mask.any():  # empty clusters keep their previous center
                    centers[c] = points[mask].mean(axis=0)

        obj = float(((points - centers[labels]) ** 2).sum())
        if obj < best_obj:
            best_labels, best_obj = labels, obj
    return best_labels, best_obj


def spectral_cluster(graph: WeightedGraph, config: SpectralConfig = SpectralConfig()) -> Partition:
    """Partition a stripped graph into config.k clusters.

    Embeds each node through the k smallest eigenvectors of L_norm and runs
    seeded k-means on the embedding. Deterministic given (graph, config).
    """
    _require_positive_degrees(graph)
    if graph.n_nodes <= config.k:
        raise ValueError(
            f"graph has {graph.n_nodes} nodes; need more than k={config.k}")
    _, u = smallest_eigenpairs(graph, config.k, config.eigensolver_tolerance)
    labels, _ = kmeans(
        u,
        config.k,
        restarts=config.kmeans_restarts,
        max_iters=config.kmeans_max_iters,
        seed=config.seed,
    )
    return Partition(labels, config.k)


def _cluster_cut_and_volume(graph: WeightedGraph, partition: Partition):
    """Per-cluster (cut weight, volume); raises on nonempty zero-volume clusters."""
    if len(partition.labels) != graph.n_nodes:
        raise ValueError(
            f"partition labels {len(partition.labels)} nodes, graph has {graph.n_nodes}")
    _require_positive_degrees(graph)
    cuts = np.zeros(partition.k)
    vols = np.zeros(partition.k)
    for c in range(partition.k):
        mask = partition.labels == c
        if not mask.any():
            continue
        vols[c] = graph.degrees[mask].sum()
        cuts[c] = vols[c] - graph.adjacency[mask][:, mask].sum()
    return cuts, vols


def ncut(graph: WeightedGraph, partition: Partition) -> float:
    """n-cut of ``partition`` on ``graph``; empty clusters contribute nothing."""
    cuts, vols = _cluster_cut_and_volume(graph, partition)
    used = vols > 0
    return float((cuts[used] / vols[used]).sum())


def ncut_stub_estimate(graph: WeightedGraph, partition: Partition, samples: int,
                       seed: int = 0) -> float:
    """Monte-Carlo estimate of ncut / k by stub sampling.

    Repeats ``samples`` times: choose a cluster uniformly, choose an edge
    stub attached to the cluster with probability proportional to its weight,
    and count a failure when the edge crosses the cluster boundary. The
    failure frequency estimates ncut / k.
    """
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    if len(partition.labels) != graph.n_nodes:
        raise ValueError(
            f"partition labels {len(partition.labels)} nodes, graph has {graph.n_nodes}")
    _require_positive_degrees(graph)
    if partition.is_degenerate:
        raise ValueError(f"empty clusters {partition.empty_clusters()}: "
                         "stub sampling needs every cluster populated")

    adjacency = graph.adjacency
    stub_weights = []
    stub_crosses = []
    for c in range(partition.k):
        members = partition.members(c)
        block = adjacency[members].tocoo()  # one stub per nonzero of member rows
        stub_weights.append(block.data)
        stub_crosses.append(partition.labels[block.col] != c)

    rng = child_rng(seed, STREAM_STUB)
    draws = rng.integers(0, partition.k, size=samples)
    counts = np.bincount(draws, minlength=partition.k)
    failures = 0
    for c in range(partition.k):
        if counts[c] == 0:
            continue
        w = stub_weights[c]
        if w.size == 0:
            raise ValueError(f"cluster {c} has zero volume")
        picks = rng.choice(w.size, size=counts[c], p=w / w.sum())
        failures += int(stub_crosses[c][picks].sum())
    return failures / samples


BRUTE_FORCE_MAX_NODES = 12


def _exact_label_matrix(n: int, k: int) -> np.ndarray:
    """All canonical labelings of n nodes into exactly k nonempty blocks.

    Canonical means block numbers appear in first-use order, so each set
    partition is produced once (restricted growth strings).
    """
    out: list[np.ndarray] = []
    labels = np.zeros(n, dtype=np.int64)

    def extend(i: int, used: int) -> None:
        if used + (n - i) < k:  # cannot reach k blocks any more
            return
        if i == n:
            if used == k:
                out.append(labels.copy())
            return
        for c in range(min(used + 1, k)):
            labels[i] = c
            extend(i + 1, used + (1 if c == used else 0))

    extend(0, 0)
    return np.array(out)


def brute_force_min_ncut(graph: WeightedGraph, k: int,
                         batch: int = 4096) -> tuple[Partition, float]:
    """Exact minimum n-cut over all partitions into k nonempty clusters.

    Exhaustive, for cross-checks only: refuses graphs above
    BRUTE_FORCE_MAX_NODES nodes.
    """
    _require_positive_degrees(graph)
    n = graph.n_nodes
    if n > BRUTE_FORCE_MAX_NODES:
        raise ValueError(
            f"exhaustive search capped at {BRUTE_FORCE_MAX_NODES} nodes, got {n}")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got k={k}")

    all_labels = _exact_label_matrix(n, k)
    a = graph.adjacency.toarray()
    d = graph.degrees
    best_value = np.inf
    best_labels = None
    for start in range(0, len(all_labels), batch):
        lb = all_labels[start : start + batch]
        z = (lb[:, None, :] == np.arange(k)[None, :, None]).astype(np.float64)
        vols = z @ d                                   # (batch, k)
        inside = np.einsum("pci,ij,pcj->pc", z, a, z)  # weight inside each cluster
        values = ((vols - inside) / vols).sum(axis=1)
        i = int(np.argmin(values))
        if values[i] < best_value:
            best_value = float(values[i])
            best_labels = lb[i]
    return Partition(best_labels, k), best_value
