"""Gradient-boosted trees on the logistic loss."""

import numpy as np
import pytest

from pmf_sasv.classifiers.dataset import Dataset
from pmf_sasv.classifiers.gbdt import BadTreeConfigError, GbdtConfig, candidate_thresholds, first_split, train_gbdt
from pmf_sasv.classifiers.models import ModelKind, train_flat_classifier
from pmf_sasv.errors import ConfigError


def xor_data(rng):
    """XOR quadrants with unequal counts so the root split has positive gain."""
    blocks = []
    labels = []
    for (sx, sy), count, label in (((1, 1), 40, 0), ((-1, -1), 20, 0), ((1, -1), 30, 1), ((-1, 1), 10, 1)):
        blocks.append(np.column_stack([sx + 0.1 * rng.standard_normal(count), sy + 0.1 * rng.standard_normal(count)]))
        labels += [label] * count
    return Dataset(features=np.vstack(blocks), labels=np.array(labels))


def test_candidate_thresholds_are_midpoints():
    np.testing.assert_array_equal(candidate_thresholds(np.array([3.0, 1.0, 2.0, 2.0]), 16), [1.5, 2.5])
    assert candidate_thresholds(np.ones(5), 16).size == 0
    assert candidate_thresholds(np.arange(1000.0), 8).size <= 7


def test_fits_xor(rng):
    data = xor_data(rng)
    model = train_gbdt(data, n_trees=50, max_depth=2, lr=0.3, seed=0)
    scores = model.score_batch(data.features)
    assert np.mean((scores >= 0.5) == (data.labels == 1)) >= 0.98
    assert model.kind is ModelKind.GBDT


def test_root_split_near_zero(rng):
    model = train_gbdt(xor_data(rng), n_trees=1, max_depth=2, seed=0)
    feature, threshold = first_split(model)
    assert feature in (0, 1)
    assert abs(threshold) < 0.8


def test_deterministic_with_subsampling(rng):
    data = xor_data(rng)
    config = GbdtConfig(subsample=0.7)
    a = train_gbdt(data, n_trees=10, max_depth=2, seed=5, config=config)
    b = train_gbdt(data, n_trees=10, max_depth=2, seed=5, config=config)
    assert a.digest() == b.digest()


def test_bad_tree_config(rng):
    with pytest.raises(BadTreeConfigError):
        train_gbdt(xor_data(rng), n_trees=0)


def test_flat_classifier_dispatch(rng):
    data = xor_data(rng)
    model = train_flat_classifier(ModelKind.GBDT, data, {"n_trees": 5, "max_depth": 2}, seed=1)
    assert model.config["n_trees"] == 5
    with pytest.raises(ConfigError):
        train_flat_classifier(ModelKind.GROUPED_MLP, data, {}, seed=1)


def test_grid_entry_merges_over_section(rng):
    data = xor_data(rng)
    grid_entry = {"n_trees": 5, "max_depth": 2}
    default = train_flat_classifier(ModelKind.GBDT, data, grid_entry, seed=1)
    steep = train_flat_classifier(ModelKind.GBDT, data, grid_entry, seed=1, base=GbdtConfig(lr=0.9, max_depth=4))
    assert steep.config["lr"] == 0.9
    assert steep.config["max_depth"] == 2
    assert default.config["lr"] == 0.1
    assert default.digest() != steep.digest()
    assert not np.allclose(default.score_batch(data.features), steep.score_batch(data.features))


def test_invalid_merged_values(rng):
    with pytest.raises(ConfigError):
        train_flat_classifier(ModelKind.GBDT, xor_data(rng), {"n_trees": 0}, seed=1, base=GbdtConfig())
