"""Synthetic desk-scale datasets for the training demos.

Three generators cover the training regimes worth probing for weight
clusterability: noise with random labels (nothing learnable, forces either
indifference or memorization), a many-output polynomial regression built
from shared monomials (modular structure in the target), and well separated
Gaussian blobs (an easy classification task networks solve without
memorizing).
"""

from __future__ import annotations

import numpy as np

from ._rng import STREAM_DATA, child_rng

__all__ = [
    "gen_random_dataset",
    "gen_polynomial_dataset",
    "polynomial_targets",
    "gen_blob_dataset",
]


def gen_random_dataset(n_samples: int, height: int, width: int,
                       n_classes: int, seed: int):
    """Uniform noise images with uniform random labels.

    Returns ``(x, y)`` with x of shape (n_samples, height * width) drawn
    from U[0, 1) as float32 and integer labels drawn uniformly from
    ``range(n_classes)``.
    """
    if n_samples < 1 or height < 1 or width < 1 or n_classes < 1:
        raise ValueError("n_samples, height, width and n_classes must be >= 1")
    rng = child_rng(seed, STREAM_DATA)
    x = rng.random((n_samples, height * width), dtype=np.float32)
    y = rng.integers(0, n_classes, size=n_samples, dtype=np.int64)
    return x, y


def polynomial_targets(x: np.ndarray, max_exponent: int = 2) -> np.ndarray:
    """Evaluate every subset-sum of two-variable monomials at the inputs.

    Monomial t = (max_exponent + 1) * a + b is x0^a * x1^b with exponents in
    ``range(max_exponent + 1)``. Output p (one per subset of monomials) is
    the sum of the monomials whose bit is set in p, so the output dimension
    is 2 ** (max_exponent + 1) ** 2 and distinct outputs share terms.
    """
    if max_exponent not in (1, 2):
        raise ValueError(
            f"max_exponent must be 1 or 2, got {max_exponent} "
            "(the output dimension grows as 2 ** (max_exponent + 1) ** 2)"
        )
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 2:
        raise ValueError(f"inputs must have shape (n, 2), got {x.shape}")
    e1 = max_exponent + 1
    powers0 = np.stack([x[:, 0] ** a for a in range(e1)], axis=1)
    powers1 = np.stack([x[:, 1] ** b for b in range(e1)], axis=1)
    monomials = (powers0[:, :, None] * powers1[:, None, :]).reshape(len(x), e1 * e1)
    n_outputs = 1 << (e1 * e1)
    bits = np.arange(e1 * e1)
    selector = (np.arange(n_outputs)[:, None] >> bits[None, :]) & 1
    return monomials @ selector.T.astype(np.float64)


def gen_polynomial_dataset(n_samples: int, max_exponent: int = 2, seed: int = 0):
    """Standard-normal inputs in R^2 with polynomial subset-sum targets."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = child_rng(seed, STREAM_DATA)
    x = rng.standard_normal((n_samples, 2)).astype(np.float32)
    y = polynomial_targets(x.astype(np.float64), max_exponent)
    return x, y.astype(np.float32)


def gen_blob_dataset(n_samples: int, n_classes: int = 10, n_features: int = 49,
                     seed: int = 0, noise: float = 0.25):
    """Isotropic Gaussian blobs around standard-normal class centers.

    At the default 49 features the centers sit far apart relative to the
    noise, so the task is easily learnable without memorization.
    """
    if n_samples < 1 or n_classes < 1 or n_features < 1:
        raise ValueError("n_samples, n_classes and n_features must be >= 1")
    rng = child_rng(seed, STREAM_DATA)
    centers = rng.standard_normal((n_classes, n_features))
    y = rng.integers(0, n_classes, size=n_samples, dtype=np.int64)
    x = centers[y] + noise * rng.standard_normal((n_samples, n_features))
    return x.astype(np.float32), y
