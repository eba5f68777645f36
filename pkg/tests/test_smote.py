"""Borderline SMOTE oversampling."""

import numpy as np
import pytest

from pmf_sasv.classifiers.dataset import Dataset, FeatureLayout
from pmf_sasv.classifiers.smote import TooFewMinoritySamplesError, borderline_seeds, smote_oversample


def imbalanced(rng, n_major=80, n_minor=20):
    X = np.vstack([rng.normal(0.0, 1.0, (n_major, 3)), rng.normal(1.5, 1.0, (n_minor, 3))])
    y = np.array([0] * n_major + [1] * n_minor)
    genders = ["male"] * (n_major + n_minor)
    return Dataset(features=X, labels=y, genders=genders)


def test_classes_are_balanced_and_originals_kept(rng):
    data = imbalanced(rng)
    out = smote_oversample(data, k_neighbors=5, seed=0)
    assert out.class_counts() == (80, 80)
    np.testing.assert_array_equal(out.features[:100], data.features)
    assert np.all(out.labels[100:] == 1)
    assert all(sid.startswith("smote") for sid in out.source_ids[100:])


def test_synthetic_rows_stay_within_minority_hull_box(rng):
    data = imbalanced(rng)
    out = smote_oversample(data, k_neighbors=3, seed=1)
    minority = data.features[data.labels == 1]
    synthetic = out.features[100:]
    assert np.all(synthetic >= minority.min(axis=0) - 1e-12)
    assert np.all(synthetic <= minority.max(axis=0) + 1e-12)


def test_deterministic(rng):
    data = imbalanced(rng)
    a = smote_oversample(data, seed=4)
    b = smote_oversample(data, seed=4)
    np.testing.assert_array_equal(a.features, b.features)


def test_balanced_input_unchanged(rng):
    data = imbalanced(rng, n_major=10, n_minor=10)
    assert smote_oversample(data) is data


def test_too_few_minority_rows(rng):
    with pytest.raises(TooFewMinoritySamplesError):
        smote_oversample(imbalanced(rng, n_major=30, n_minor=4), k_neighbors=5)


def test_borderline_seeds_are_minority_rows_near_the_majority():
    X = np.array([[0.0], [0.1], [0.2], [5.0], [5.1], [0.3]])
    y = np.array([0, 0, 0, 1, 1, 1])
    seeds = borderline_seeds(X, y, minority=1, k_neighbors=1)
    np.testing.assert_array_equal(seeds, [5])


def test_grouped_layout_is_preserved(rng):
    data = imbalanced(rng)
    grouped = Dataset(features=np.repeat(data.features[:, :, None], 2, axis=2), labels=data.labels,
                      layout=FeatureLayout.GROUPED)
    out = smote_oversample(grouped, k_neighbors=3, seed=0)
    assert out.features.shape == (160, 3, 2)
