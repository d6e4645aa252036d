"""Clusterable initialization by random unit tagging.

Each hidden unit draws an i.i.d. uniform tag from {0..c-1}. Weights between
two hidden units are scaled by 1 + (1 - beta)(c - 1) when the tags match and
by beta when they differ; weights touching input or output units, and all
biases, are left alone. A uniformly random tag pair matches with probability
1/c, so the expected multiplier is exactly 1 and the overall weight scale is
preserved while same-tag connectivity is boosted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._rng import STREAM_TAGS, child_rng
from .archive import ArchiveBuilder, WeightArchive


def tag_multipliers(c: int, beta: float) -> tuple[float, float]:
    """(same-tag, cross-tag) weight multipliers; their tag-average is 1."""
    return 1.0 + (1.0 - beta) * (c - 1), beta


@dataclass(frozen=True)
class InitTagging:
    """Tag assignment for every hidden unit of a dense archive.

    ``tags[i]`` holds the tags (0..c-1) of the output units of dense layer i,
    one array per hidden layer (the final layer's outputs are not hidden and
    carry no tags).
    """

    c: int
    beta: float
    seed: int
    tags: tuple[np.ndarray, ...] = field(default=())

    def __post_init__(self):
        if self.c < 1:
            raise ValueError(f"c must be at least 1, got {self.c}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        tags = tuple(np.asarray(t, dtype=np.int64) for t in self.tags)
        for t in tags:
            if t.size and (t.min() < 0 or t.max() >= self.c):
                raise ValueError(f"tags must lie in [0, {self.c}), got range "
                                 f"[{t.min()}, {t.max()}]")
            t.setflags(write=False)
        object.__setattr__(self, "tags", tags)


def _require_hidden_dense(archive: WeightArchive) -> None:
    if not archive.all_dense():
        raise ValueError("clusterable init is defined for dense archives only")
    if len(archive.layers) < 2:
        raise ValueError("archive has no hidden layers to tag")


def assign_tags(archive: WeightArchive, c: int, seed: int, beta: float = 0.6) -> InitTagging:
    """Draw i.i.d. uniform tags for every hidden unit of ``archive``."""
    _require_hidden_dense(archive)
    rng = child_rng(seed, STREAM_TAGS)
    tags = tuple(
        rng.integers(0, c, size=archive.layers[i].shape[1])
        for i in range(len(archive.layers) - 1)
    )
    return InitTagging(c=c, beta=beta, seed=seed, tags=tags)


def apply_clusterable_init(archive: WeightArchive, tagging: InitTagging) -> WeightArchive:
    """Scale hidden-to-hidden weights of ``archive`` according to ``tagging``.

    Returns a new archive; weight matrices touching the input or output
    layer, biases, and layer metadata are preserved bit for bit.
    """
    _require_hidden_dense(archive)
    n_layers = len(archive.layers)
    if len(tagging.tags) != n_layers - 1:
        raise ValueError(f"tagging covers {len(tagging.tags)} hidden layers, "
                         f"archive has {n_layers - 1}")
    for i, t in enumerate(tagging.tags):
        if t.size != archive.layers[i].shape[1]:
            raise ValueError(f"hidden layer {i}: {t.size} tags for "
                             f"{archive.layers[i].shape[1]} units")

    same_mult, cross_mult = tag_multipliers(tagging.c, tagging.beta)
    b = ArchiveBuilder()
    for s in range(n_layers):
        w = archive.layer_weights(s)
        if 1 <= s <= n_layers - 2:  # both endpoints are hidden units
            in_tags = tagging.tags[s - 1]
            out_tags = tagging.tags[s]
            same = in_tags[:, None] == out_tags[None, :]
            factors = np.where(same, np.float32(same_mult), np.float32(cross_mult))
            w = (w * factors).astype(np.float32)
        b.add_dense(archive.layers[s].name, w, bias=archive.layer_bias(s))
    return b.build()
