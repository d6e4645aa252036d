"""Shared fixture builders for the test suite."""

import numpy as np

from nncluster.archive import ArchiveBuilder


def make_planted_archive(seed=0, widths=(8, 8, 8), n_blocks=2, weak=0.01):
    """Dense archive whose weight matrices are block-modular.

    Units are split into ``n_blocks`` equal groups per layer; same-group
    weights are drawn from U(0.75, 1.25), cross-group weights from
    U(0, weak). The resulting graph has an obvious k = n_blocks partition.
    """
    rng = np.random.default_rng(seed)
    b = ArchiveBuilder()
    for s in range(len(widths) - 1):
        n_in, n_out = widths[s], widths[s + 1]
        w = rng.uniform(0, weak, size=(n_in, n_out))
        gi = (np.arange(n_in) * n_blocks) // n_in
        go = (np.arange(n_out) * n_blocks) // n_out
        same = gi[:, None] == go[None, :]
        w[same] = rng.uniform(0.75, 1.25, size=int(same.sum()))
        b.add_dense(f"fc{s}", w.astype(np.float32))
    return b.build()


def random_dense_archive(seed=0, widths=(6, 8, 6), scale=None):
    """Dense archive with Gaussian weights (no zeros, fully connected graph)."""
    rng = np.random.default_rng(seed)
    b = ArchiveBuilder()
    for s in range(len(widths) - 1):
        sd = scale if scale is not None else np.sqrt(2.0 / widths[s])
        w = rng.normal(0, sd, size=(widths[s], widths[s + 1]))
        b.add_dense(f"fc{s}", w.astype(np.float32))
    return b.build()
