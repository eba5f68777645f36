"""EER, DCF and the threshold sweep."""

import numpy as np
import pytest

from pmf_sasv.labels import TrialClass
from pmf_sasv.metrics.costs import TandemCostModel
from pmf_sasv.metrics.rates import (
    asv_eer,
    cm_eer,
    dcf,
    eer_from_arrays,
    error_rates,
    min_dcf,
    sweep_thresholds,
)
from pmf_sasv.metrics.scores import EmptyClassError, TrialScoreSet

from helpers import gaussian_scores


def test_sweep_has_both_infinities_and_midpoints():
    grid = sweep_thresholds(np.array([1.0, 3.0, 3.0]), np.array([2.0]))
    np.testing.assert_array_equal(grid, [-np.inf, 1.5, 2.5, np.inf])


def test_perfect_separation():
    value, tau = eer_from_arrays(np.array([2.0, 3.0]), np.array([0.0, 1.0]))
    assert value == 0.0
    assert tau == 1.5


def test_reversed_scores_give_full_error():
    value, _ = eer_from_arrays(np.array([0.0, 1.0]), np.array([2.0, 3.0]))
    assert value == pytest.approx(1.0)


def test_eer_balanced_overlap():
    # One miss (3.0) and one false alarm (3.5) out of four each
    value, tau = eer_from_arrays(np.array([3.0, 4.0, 5.0, 6.0]), np.array([0.0, 1.0, 2.0, 3.5]))
    assert value == pytest.approx(0.25)
    assert tau == pytest.approx(3.25)


def test_eer_near_theory_for_gaussians(rng):
    scores = gaussian_scores(rng, 4000, 4000, separation=2.0)
    value, _ = cm_eer(scores)
    # Two unit Gaussians two apart cross at Phi(-1) = 0.1587
    assert value == pytest.approx(0.1587, abs=0.015)


def test_cm_eer_counts_every_bona_fide_class():
    scores = TrialScoreSet.from_arrays(
        [0.9, 0.8, 0.7, 0.1, 0.2],
        ["target", "nontarget", "bonafide", "spoof", "spoof"],
    )
    assert cm_eer(scores)[0] == 0.0


def test_asv_eer_ignores_spoofs():
    scores = TrialScoreSet.from_arrays([0.9, 0.8, 0.1, 5.0], ["target", "target", "nontarget", "spoof"])
    assert asv_eer(scores)[0] == 0.0


def test_missing_class():
    scores = TrialScoreSet.from_arrays([0.9, 0.8], ["target", "target"])
    with pytest.raises(EmptyClassError):
        asv_eer(scores)


def test_error_rates_accept_at_threshold():
    scores = TrialScoreSet.from_arrays([1.0, 2.0, 1.0, 0.0], ["target", "target", "nontarget", "nontarget"])
    assert error_rates(scores, 1.0) == (0.0, 0.5)
    assert error_rates(scores, 1.5) == (0.5, 0.0)


class TestDcf:

    def test_hand_value(self):
        cost = TandemCostModel.asv_only()
        scores = TrialScoreSet.from_arrays([1.0, 2.0, 1.0, 0.0], ["target", "target", "nontarget", "nontarget"])
        assert dcf(scores, 1.5, cost) == pytest.approx(0.99 * 0.5)
        assert dcf(scores, 1.0, cost) == pytest.approx(0.01 * 0.5)

    def test_min_matches_brute_force(self, rng):
        cost = TandemCostModel.asv_only(pi_tar=0.5, c_fa=3.0)
        scores = gaussian_scores(rng, 30, 25, 1.0, TrialClass.TARGET, TrialClass.NONTARGET)
        candidates = np.append(np.unique(scores.scores), np.inf)
        expected = min(dcf(scores, t, cost) for t in candidates)
        value, tau = min_dcf(scores, cost)
        assert value == pytest.approx(expected)
        assert dcf(scores, tau, cost) == pytest.approx(value)
