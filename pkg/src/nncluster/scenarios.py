"""Named end-to-end training scenarios at desk scale.

Each scenario bundles a dataset, a model init, and a training config into a
single reproducible recipe keyed by name and seed:

* ``random-unlearnable``: plenty of noise images with random labels and few
  epochs, so the network cannot do better than chance. Trained nets should
  show no more clusterability than their shuffles.
* ``memorize``: few enough noise images to memorize, long training without
  inter-epoch shuffling. Memorization tends to leave genuinely clusterable
  weights behind after pruning.
* ``poly-regression``: many regression outputs sharing monomial terms, a
  target with built-in modular structure.
* ``regularized``: an easy blob classification task trained with the
  eigenvalue penalty plus pruning.
* ``clusterable-init``: the same blob task trained from a tagged
  block-structured init plus pruning.

All scenarios prune where the effect of interest appears after pruning, and
every run is a pure function of (name, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archive import WeightArchive
from .datasets import gen_blob_dataset, gen_polynomial_dataset, gen_random_dataset
from .init_transform import apply_clusterable_init, assign_tags
from .model import MlpModel, he_init, model_from_archive, model_to_archive
from .regularizer import RegularizerConfig
from .trainer import PruneSchedule, TrainConfig, TrainResult, train

__all__ = ["SCENARIOS", "ScenarioSetup", "ScenarioResult", "build_scenario",
           "run_scenario"]

SCENARIOS = (
    "random-unlearnable",
    "memorize",
    "poly-regression",
    "regularized",
    "clusterable-init",
)

_PRUNE = PruneSchedule(initial_sparsity=0.5, final_sparsity=0.9, frequency=10)


@dataclass
class ScenarioSetup:
    name: str
    seed: int
    model: MlpModel
    x: np.ndarray
    y: np.ndarray
    config: TrainConfig


@dataclass
class ScenarioResult:
    name: str
    seed: int
    model: MlpModel
    archive: WeightArchive
    metrics: list[dict]


def _random_unlearnable(seed: int) -> ScenarioSetup:
    x, y = gen_random_dataset(12000, 28, 28, 10, seed=seed)
    model = he_init([784, 256, 256, 10], seed=seed, head="softmax")
    config = TrainConfig(epochs_pre_prune=10, epochs_prune=10, seed=seed,
                         prune=_PRUNE)
    return ScenarioSetup("random-unlearnable", seed, model, x, y, config)


def _memorize(seed: int) -> ScenarioSetup:
    x, y = gen_random_dataset(2000, 28, 28, 10, seed=seed)
    model = he_init([784, 256, 256, 10], seed=seed, head="softmax")
    config = TrainConfig(epochs_pre_prune=100, epochs_prune=100, seed=seed,
                         shuffle_each_epoch=False, prune=_PRUNE)
    return ScenarioSetup("memorize", seed, model, x, y, config)


def _poly_regression(seed: int) -> ScenarioSetup:
    x, y = gen_polynomial_dataset(256, max_exponent=2, seed=seed)
    model = he_init([2, 64, 64, 512], seed=seed, head="linear")
    config = TrainConfig(loss="mean_squared_error", epochs_pre_prune=200,
                         epochs_prune=100, seed=seed, prune=_PRUNE)
    return ScenarioSetup("poly-regression", seed, model, x, y, config)


def _regularized(seed: int) -> ScenarioSetup:
    x, y = gen_blob_dataset(512, n_classes=10, n_features=49, seed=seed)
    model = he_init([49, 64, 64, 64, 10], seed=seed, head="softmax")
    config = TrainConfig(
        epochs_pre_prune=100, epochs_prune=100, seed=seed, prune=_PRUNE,
        regularizer=RegularizerConfig(eigen_indices=(2, 3, 4), weight=0.1,
                                      recompute_every=1),
    )
    return ScenarioSetup("regularized", seed, model, x, y, config)


def _clusterable_init(seed: int) -> ScenarioSetup:
    x, y = gen_blob_dataset(512, n_classes=10, n_features=49, seed=seed)
    base = he_init([49, 64, 64, 10], seed=seed, head="softmax")
    archive = model_to_archive(base)
    tagging = assign_tags(archive, c=10, seed=seed, beta=0.6)
    model = model_from_archive(apply_clusterable_init(archive, tagging),
                               head="softmax")
    config = TrainConfig(epochs_pre_prune=100, epochs_prune=100, seed=seed,
                         prune=_PRUNE)
    return ScenarioSetup("clusterable-init", seed, model, x, y, config)


_BUILDERS = {
    "random-unlearnable": _random_unlearnable,
    "memorize": _memorize,
    "poly-regression": _poly_regression,
    "regularized": _regularized,
    "clusterable-init": _clusterable_init,
}


def build_scenario(name: str, seed: int = 0) -> ScenarioSetup:
    """Dataset, initial model, and config for a named scenario."""
    if name not in _BUILDERS:
        raise ValueError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    return _BUILDERS[name](seed)


def run_scenario(name: str, seed: int = 0) -> ScenarioResult:
    """Build and train a scenario, returning the trained model and archive."""
    setup = build_scenario(name, seed)
    result: TrainResult = train(setup.model, setup.x, setup.y, setup.config)
    return ScenarioResult(
        name=name,
        seed=seed,
        model=result.model,
        archive=model_to_archive(result.model),
        metrics=result.metrics,
    )
