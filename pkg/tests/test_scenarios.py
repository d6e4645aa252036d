"""Smoke tests for the named training scenarios.

The heavyweight directional claims (p-value orderings, n-cut orderings) live
in the acceptance suite; here we only check that scenario recipes assemble
correctly, run deterministically at small scale, and hand back archives.
"""

import numpy as np
import pytest

from nncluster.archive import validate_archive
from nncluster.model import he_init
from nncluster.scenarios import SCENARIOS, build_scenario, run_scenario


def test_scenario_names():
    assert SCENARIOS == (
        "random-unlearnable",
        "memorize",
        "poly-regression",
        "regularized",
        "clusterable-init",
    )


def test_unknown_scenario_rejected():
    with pytest.raises(ValueError):
        build_scenario("does-not-exist")


@pytest.mark.parametrize("name", SCENARIOS)
def test_build_shapes_are_consistent(name):
    setup = build_scenario(name, seed=0)
    assert setup.name == name
    assert setup.x.shape[1] == setup.model.widths[0]
    assert setup.x.shape[0] == len(setup.y)
    if setup.config.loss == "mean_squared_error":
        assert setup.y.shape[1] == setup.model.widths[-1]
    else:
        assert setup.y.max() < setup.model.widths[-1]


def test_build_is_deterministic():
    a = build_scenario("poly-regression", seed=3)
    b = build_scenario("poly-regression", seed=3)
    assert np.array_equal(a.x, b.x)
    for wa, wb in zip(a.model.weights, b.model.weights):
        assert np.array_equal(wa, wb)


def test_clusterable_init_transform_applied():
    setup = build_scenario("clusterable-init", seed=0)
    plain = he_init(setup.model.widths, seed=0, head="softmax")
    # The hidden-to-hidden block is rescaled relative to an untransformed
    # init; input- and output-touching blocks are not.
    assert not np.allclose(setup.model.weights[1], plain.weights[1])
    np.testing.assert_allclose(setup.model.weights[0], plain.weights[0],
                               atol=1e-7)
    np.testing.assert_allclose(setup.model.weights[2], plain.weights[2],
                               atol=1e-7)


def test_memorize_disables_epoch_shuffling():
    assert build_scenario("memorize", seed=0).config.shuffle_each_epoch is False
    assert build_scenario("random-unlearnable", seed=0).config.shuffle_each_epoch


def test_regularized_scenario_carries_penalty():
    setup = build_scenario("regularized", seed=0)
    assert setup.config.regularizer is not None
    assert setup.config.regularizer.eigen_indices == (2, 3, 4)


def test_run_poly_regression_end_to_end():
    result = run_scenario("poly-regression", seed=0)
    validate_archive(result.archive)
    assert result.metrics[-1]["data_loss"] < result.metrics[0]["data_loss"]
    assert result.metrics[-1]["sparsity"] == pytest.approx(0.9, abs=0.01)
    sparsity = [float((w == 0).mean()) for w in result.model.weights]
    assert all(s >= 0.85 for s in sparsity)
