"""Grouped countermeasure network: backprop, training loop and scoring."""

import numpy as np
import pytest

from pmf_sasv.classifiers.dataset import Dataset, FeatureLayout, LayoutMismatchError
from pmf_sasv.classifiers.grouped_mlp import (
    GroupedMlpSpec,
    Head,
    Variant,
    forward,
    init_parameters,
    loss_and_grads,
    train_grouped_mlp,
)
from pmf_sasv.classifiers.losses import OcSoftmaxConfig
from pmf_sasv.classifiers.models import ScoreRange
from pmf_sasv.metrics.rates import eer_from_arrays

SMALL = dict(group_width=3, merge_width=4, dropout_p=0.0)


def grouped_data(rng, n=80, shift=1.0):
    y = np.arange(n) % 2
    X = rng.standard_normal((n, 16, 10)) + np.where(y == 1, shift, -shift)[:, None, None]
    return Dataset(features=X, labels=y, layout=FeatureLayout.GROUPED)


@pytest.mark.parametrize("spec", [
    GroupedMlpSpec(**SMALL),
    GroupedMlpSpec(**SMALL, residual=True, head=Head.ONE_CLASS_SOFTMAX, out_width=3),
], ids=["sigmoid", "ocsoftmax_residual"])
def test_gradients_match_central_differences(rng, spec):
    params = init_parameters(spec, seed=3)
    X = 0.5 * rng.standard_normal((12, 16, 10))
    y = (np.arange(12) % 2).astype(float)
    ocs = OcSoftmaxConfig(alpha_scale=5.0)
    _, grads = loss_and_grads(params, X, y, spec, ocs)
    h = 1e-6
    for name, value in params.items():
        flat = value.reshape(-1)
        for i in rng.choice(flat.size, size=min(5, flat.size), replace=False):
            original = flat[i]
            flat[i] = original + h
            plus = loss_and_grads(params, X, y, spec, ocs)[0]
            flat[i] = original - h
            minus = loss_and_grads(params, X, y, spec, ocs)[0]
            flat[i] = original
            numeric = (plus - minus) / (2 * h)
            assert grads[name].reshape(-1)[i] == pytest.approx(numeric, rel=1e-3, abs=1e-7), name


def test_presets():
    male = GroupedMlpSpec.preset(Variant.MALE)
    female = GroupedMlpSpec.preset(Variant.FEMALE)
    gi = GroupedMlpSpec.preset(Variant.GENDER_INDEPENDENT)
    assert (male.group_width, male.merge_width, male.head) == (5, 40, Head.SIGMOID)
    assert (female.out_width, female.residual, female.head) == (48, True, Head.ONE_CLASS_SOFTMAX)
    assert (gi.merge_width, gi.out_width, gi.batch_size) == (80, 32, 128)


def test_sigmoid_head_needs_single_output():
    with pytest.raises(ValueError):
        GroupedMlpSpec(out_width=4, head=Head.SIGMOID)


def test_dropout_masks_follow_the_generator(rng):
    spec = GroupedMlpSpec(group_width=3, merge_width=4, dropout_p=0.5)
    params = init_parameters(spec, seed=1)
    X = rng.standard_normal((6, 16, 10))
    y = np.array([0, 1, 0, 1, 0, 1], dtype=float)
    a = loss_and_grads(params, X, y, spec, rng=np.random.default_rng(9))[0]
    b = loss_and_grads(params, X, y, spec, rng=np.random.default_rng(9))[0]
    no_dropout = loss_and_grads(params, X, y, spec, rng=None)[0]
    assert a == b
    assert a != no_dropout


def test_zero_epochs_returns_initial_network(rng):
    data = grouped_data(rng, n=10)
    spec = GroupedMlpSpec(**SMALL, epochs=0, seed=4)
    model = train_grouped_mlp(data, spec)
    expected, _ = forward(init_parameters(spec, 4), data.features, False, Head.SIGMOID)
    np.testing.assert_allclose(model.score_batch(data.features), expected)


def test_learns_separable_rows(rng, tmp_path):
    data = grouped_data(rng)
    dev = grouped_data(np.random.default_rng(99), n=40)
    spec = GroupedMlpSpec(**SMALL, epochs=40, batch_size=16, learning_rate=0.05, seed=0)
    log = tmp_path / "log.csv"
    model = train_grouped_mlp(data, spec, dev=dev, log_path=log)
    scores = model.score_batch(dev.features)
    assert eer_from_arrays(scores[dev.labels == 1], scores[dev.labels == 0])[0] < 0.1
    lines = log.read_text().splitlines()
    assert lines[0] == "epoch,loss,dev_eer"
    assert len(lines) == 41


def test_ocsoftmax_scores_are_cosines(rng):
    data = grouped_data(rng, n=20)
    spec = GroupedMlpSpec(**SMALL, epochs=2, batch_size=8, residual=True,
                          head=Head.ONE_CLASS_SOFTMAX, out_width=4)
    model = train_grouped_mlp(data, spec)
    scores = model.score_batch(data.features)
    assert model.score_range is ScoreRange.SYMMETRIC
    assert np.all((scores >= -1) & (scores <= 1))
    assert model.config["ocsoftmax"]["m_target"] == 0.9


def test_flat_rows_rejected(rng):
    flat = Dataset(features=rng.standard_normal((10, 160)), labels=np.arange(10) % 2)
    with pytest.raises(LayoutMismatchError):
        train_grouped_mlp(flat, GroupedMlpSpec(**SMALL, epochs=1))
