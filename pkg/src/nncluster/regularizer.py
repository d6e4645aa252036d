"""Spectral regularization and function-preserving weight normalization.

The regularizer treats the model's neuron graph (absolute weights between
adjacent layers) as a weighted graph and penalizes the smallest nontrivial
eigenvalues of its symmetric normalized Laplacian. Pushing those eigenvalues
down makes low normalized-cut partitions possible, so gradient descent on the
penalty steers training toward clusterable weights.

Eigenvalue derivatives are only well defined away from eigenvalue crossings;
``eigenvalue_gradient`` refuses to differentiate through a near-degenerate
pair and raises :class:`DegenerateEigenvalueError` instead. Callers that only
need the penalty value for logging can fall back to :func:`eigenvalue_sum`.

``normalize_hidden_units`` removes the radial degree of freedom that makes
the penalty gameable: ReLU networks compute the same function when a hidden
unit's incoming weights shrink and its outgoing weights grow by the same
factor, but that rescaling changes the graph. Pinning every hidden unit's
incoming norm to sqrt(2) fixes the gauge without changing the function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import MlpModel
from .spectral import DegenerateEigenvalueError

__all__ = [
    "RegularizerConfig",
    "EigenGradient",
    "DegenerateEigenvalueError",
    "eigenvalue_gradient",
    "eigenvalue_sum",
    "regularizer_loss_and_grad",
    "normalize_hidden_units",
]

# Minimum distance to the nearest neighboring eigenvalue before the
# derivative is considered ill defined.
EIGENGAP_MIN = 1e-8

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class RegularizerConfig:
    """Settings for the eigenvalue penalty.

    ``eigen_indices`` are 1-based positions in the ascending spectrum of the
    symmetric normalized Laplacian; index 1 is the trivial zero eigenvalue of
    a connected graph, so the default targets the next three. The penalty
    added to the training loss is ``weight * sum(lambda_k)``. The
    eigensystem is recomputed every ``recompute_every`` optimizer steps, with
    the gradient held fixed in between.
    """

    eigen_indices: tuple[int, ...] = (2, 3, 4)
    weight: float = 0.1
    recompute_every: int = 1

    def __post_init__(self):
        if not self.eigen_indices:
            raise ValueError("eigen_indices must not be empty")
        if any(int(k) != k or k < 1 for k in self.eigen_indices):
            raise ValueError(
                f"eigen_indices must be positive integers, got {self.eigen_indices}"
            )
        if not (self.weight >= 0 and np.isfinite(self.weight)):
            raise ValueError(f"weight must be finite and >= 0, got {self.weight}")
        if self.recompute_every < 1:
            raise ValueError(
                f"recompute_every must be >= 1, got {self.recompute_every}"
            )


@dataclass(frozen=True)
class EigenGradient:
    """One eigenvalue with its derivative field over the model weights."""

    eigen_index: int
    eigenvalue: float
    eigengap: float
    grads: list[np.ndarray]


def _dense_graph(model: MlpModel):
    """Dense adjacency of the neuron graph plus the node bookkeeping.

    Returns the adjacency restricted to alive (positive degree) nodes, their
    degrees, the boolean alive mask over all nodes, and per-layer offsets
    into the full node indexing.
    """
    widths = model.widths
    offsets = np.concatenate(([0], np.cumsum(widths)))
    n = int(offsets[-1])
    adjacency = np.zeros((n, n))
    for s, w in enumerate(model.weights):
        block = np.abs(w)
        r0, r1 = offsets[s], offsets[s + 1]
        c0, c1 = offsets[s + 1], offsets[s + 2]
        adjacency[r0:r1, c0:c1] = block
        adjacency[c0:c1, r0:r1] = block.T
    degrees = adjacency.sum(axis=1)
    alive = degrees > 0
    return adjacency[alive][:, alive], degrees[alive], alive, offsets


def _alive_eigensystem(model: MlpModel, eigen_top: int):
    """Eigenpairs of L_sym on the alive subgraph, up to 1-based ``eigen_top``.

    Solves one extra level above ``eigen_top`` when the graph has one, so
    the caller can check the upper gap of its highest index.
    """
    adjacency, degrees, alive, offsets = _dense_graph(model)
    n_alive = len(degrees)
    if n_alive == 0:
        raise ValueError("model graph has no edges")
    if eigen_top > n_alive:
        raise ValueError(
            f"eigen index {eigen_top} exceeds the {n_alive} graph nodes"
        )
    scale = 1.0 / np.sqrt(degrees)
    l_sym = -adjacency * np.outer(scale, scale)
    np.fill_diagonal(l_sym, 1.0)
    top_index = min(eigen_top, n_alive - 1)
    vals, vecs = scipy.linalg.eigh(l_sym, subset_by_index=[0, top_index])
    return vals, vecs, adjacency, degrees, alive, offsets, n_alive


def _gradient_field(model, vec, adjacency, degrees, alive, offsets):
    """Per-layer d(lambda)/dW for the unit L_sym eigenvector ``vec``.

    With u = D^(-1/2) v the derivative w.r.t. one graph edge (a, b) is
    -2 u_a u_b + p_a + p_b where p = v * (A u) * d^(-3/2); the chain rule
    through A_ab = |w| contributes sign(w). Dead nodes never carry nonzero
    weights, so the sign factor zeroes their entries regardless of the
    scattered field values.
    """
    u_alive = vec / np.sqrt(degrees)
    p_alive = vec * (adjacency @ u_alive) * degrees**-1.5
    n_total = int(offsets[-1])
    u = np.zeros(n_total)
    p = np.zeros(n_total)
    u[alive] = u_alive
    p[alive] = p_alive
    grads = []
    for s, w in enumerate(model.weights):
        rows = slice(offsets[s], offsets[s + 1])
        cols = slice(offsets[s + 1], offsets[s + 2])
        edge = -2.0 * np.outer(u[rows], u[cols]) + p[rows][:, None] + p[cols][None, :]
        grads.append(np.sign(w) * edge)
    return grads


def _gap_at(vals: np.ndarray, i: int, n_alive: int) -> float:
    """Distance from eigenvalue i (0-based) to its nearest neighbor."""
    gaps = []
    if i > 0:
        gaps.append(float(vals[i] - vals[i - 1]))
    if i + 1 < n_alive:
        gaps.append(float(vals[i + 1] - vals[i]))
    return min(gaps) if gaps else math.inf


def eigenvalue_gradient(model: MlpModel, eigen_index: int) -> EigenGradient:
    """Derivative of the ``eigen_index``-th smallest L_sym eigenvalue.

    ``eigen_index`` is 1-based. Raises :class:`DegenerateEigenvalueError`
    when the eigenvalue is within ``EIGENGAP_MIN`` of a neighbor, because the
    derivative of a repeated eigenvalue is not a well-defined field.
    """
    if eigen_index < 1:
        raise ValueError(f"eigen_index must be >= 1, got {eigen_index}")
    vals, vecs, adjacency, degrees, alive, offsets, n_alive = _alive_eigensystem(
        model, eigen_index
    )
    i = eigen_index - 1
    gap = _gap_at(vals, i, n_alive)
    if gap < EIGENGAP_MIN:
        raise DegenerateEigenvalueError(
            f"eigenvalue {eigen_index} has gap {gap:.3e} to its neighbor; "
            "the derivative is not defined at a crossing"
        )
    grads = _gradient_field(model, vecs[:, i], adjacency, degrees, alive, offsets)
    return EigenGradient(
        eigen_index=eigen_index,
        eigenvalue=float(vals[i]),
        eigengap=gap,
        grads=grads,
    )


def eigenvalue_sum(model: MlpModel, eigen_indices: tuple[int, ...]) -> float:
    """Sum of the requested L_sym eigenvalues (1-based, value only).

    Stays well defined at eigenvalue crossings, unlike the gradient, so it
    serves as the logging fallback when differentiation is refused.
    """
    vals, _, _, _, _, _, _ = _alive_eigensystem(model, max(eigen_indices))
    return float(sum(vals[k - 1] for k in eigen_indices))


def regularizer_loss_and_grad(model: MlpModel, config: RegularizerConfig):
    """Penalty value and its weight-space gradient, one eigensolve total.

    Returns ``(loss, grads)`` where ``loss = weight * sum(lambda_k)`` over
    ``config.eigen_indices`` and ``grads`` matches ``model.weights`` in
    shapes. Raises :class:`DegenerateEigenvalueError` if any requested
    eigenvalue sits at a near-crossing.
    """
    indices = sorted(set(config.eigen_indices))
    vals, vecs, adjacency, degrees, alive, offsets, n_alive = _alive_eigensystem(
        model, max(indices)
    )
    total = 0.0
    grads = [np.zeros_like(w) for w in model.weights]
    for k in indices:
        i = k - 1
        gap = _gap_at(vals, i, n_alive)
        if gap < EIGENGAP_MIN:
            raise DegenerateEigenvalueError(
                f"eigenvalue {k} has gap {gap:.3e} to its neighbor; "
                "the derivative is not defined at a crossing"
            )
        total += float(vals[i])
        field = _gradient_field(model, vecs[:, i], adjacency, degrees, alive, offsets)
        for g, f in zip(grads, field):
            g += f
    loss = config.weight * total
    for g in grads:
        g *= config.weight
    return loss, grads


def normalize_hidden_units(model: MlpModel) -> MlpModel:
    """Pin every hidden unit's incoming norm to sqrt(2), in place.

    The norm is over the unit's incoming weight column joined with its bias.
    ReLU is positively homogeneous, so scaling a unit's incoming values by
    sqrt(2)/x and its outgoing row by x/sqrt(2) preserves the network
    function exactly. Units already within a hair of the target are skipped
    outright, which makes the operation idempotent at the bit level. Dead
    units (x = 0) cannot activate, so their outgoing rows are zeroed; that
    too preserves the function.
    """
    for layer in range(model.n_layers - 1):
        w_in = model.weights[layer]
        b_in = model.biases[layer]
        w_out = model.weights[layer + 1]
        for unit in range(w_in.shape[1]):
            x = math.sqrt(float((w_in[:, unit] ** 2).sum() + b_in[unit] ** 2))
            if x == 0.0:
                w_out[unit, :] *= 0.0
            elif abs(x - _SQRT2) <= _SQRT2 * 1e-12:
                continue
            else:
                w_in[:, unit] *= _SQRT2 / x
                b_in[unit] *= _SQRT2 / x
                w_out[unit, :] *= x / _SQRT2
    return model
