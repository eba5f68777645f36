"""
Rates - Miss/false-alarm rates, EER and DCF over score thresholds.

A trial is accepted when score >= tau. Threshold sweeps use the midpoints
between consecutive distinct scores plus -inf and +inf, which covers every
distinct operating point.
"""

import logging
from typing import Iterable, Optional, Tuple

import numpy as np

from ..labels import BONAFIDE_CLASSES, TrialClass
from .costs import TandemCostModel
from .scores import EmptyClassError, TrialScoreSet

logger = logging.getLogger(__name__)

TARGET = (TrialClass.TARGET,)
NONTARGET = (TrialClass.NONTARGET,)
SPOOF = (TrialClass.SPOOF,)


def sweep_thresholds(*score_arrays: np.ndarray) -> np.ndarray:
    """Sorted thresholds: -inf, midpoints of consecutive distinct scores, +inf."""
    pooled = np.concatenate([np.ravel(a) for a in score_arrays]) if score_arrays else np.empty(0)
    distinct = np.unique(pooled)
    if distinct.size > 1:
        lower, upper = distinct[:-1], distinct[1:]
        mids = lower + (upper - lower) / 2.0
        # Midpoint must separate the two scores; fall back to the upper score
        mids = np.where((mids > lower) & (mids <= upper), mids, upper)
    else:
        mids = np.empty(0)
    return np.concatenate([[-np.inf], mids, [np.inf]])


def miss_rates(positives: np.ndarray, thresholds) -> np.ndarray:
    """Fraction of positive scores below each threshold."""
    positives = np.sort(np.asarray(positives, dtype=np.float64))
    return np.searchsorted(positives, thresholds, side="left") / positives.size


def false_alarm_rates(negatives: np.ndarray, thresholds) -> np.ndarray:
    """Fraction of negative scores at or above each threshold."""
    negatives = np.sort(np.asarray(negatives, dtype=np.float64))
    below = np.searchsorted(negatives, thresholds, side="left")
    return (negatives.size - below) / negatives.size


def split_classes(
    scores: TrialScoreSet,
    positive_class: Iterable[TrialClass],
    negative_class: Optional[Iterable[TrialClass]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Positive and negative score arrays.

    The negative class defaults to every class not in ``positive_class``.
    """
    positive_class = tuple(positive_class)
    pos_mask = scores.mask(positive_class)
    neg_mask = scores.mask(negative_class) if negative_class is not None else ~pos_mask
    positives, negatives = scores.scores[pos_mask], scores.scores[neg_mask]
    if positives.size == 0:
        raise EmptyClassError(f"No trials of positive class {[TrialClass(c).value for c in positive_class]}")
    if negatives.size == 0:
        raise EmptyClassError("No trials of the negative class")
    return positives, negatives


def error_rates(
    scores: TrialScoreSet,
    tau: float,
    positive_class: Iterable[TrialClass] = TARGET,
    negative_class: Optional[Iterable[TrialClass]] = None,
) -> Tuple[float, float]:
    """(p_miss, p_fa) at threshold ``tau``."""
    positives, negatives = split_classes(scores, positive_class, negative_class)
    return float(miss_rates(positives, [tau])[0]), float(false_alarm_rates(negatives, [tau])[0])


def rate_curves(positives: np.ndarray, negatives: np.ndarray):
    """(thresholds, p_miss, p_fa) over the full sweep."""
    thresholds = sweep_thresholds(positives, negatives)
    return thresholds, miss_rates(positives, thresholds), false_alarm_rates(negatives, thresholds)


def eer_from_arrays(positives: np.ndarray, negatives: np.ndarray) -> Tuple[float, float]:
    thresholds, p_miss, p_fa = rate_curves(positives, negatives)
    # argmin returns the first minimum, i.e. the smallest threshold
    i = int(np.argmin(np.abs(p_miss - p_fa)))
    return float((p_miss[i] + p_fa[i]) / 2.0), float(thresholds[i])


def eer(
    scores: TrialScoreSet,
    positive_class: Iterable[TrialClass] = TARGET,
    negative_class: Optional[Iterable[TrialClass]] = None,
) -> Tuple[float, float]:
    """
    Equal error rate and its threshold.

    Returns:
        (eer_value, tau_at_eer), EER averaged from p_miss and p_fa where
        |p_miss - p_fa| is smallest; ties go to the smaller threshold
    """
    positives, negatives = split_classes(scores, positive_class, negative_class)
    return eer_from_arrays(positives, negatives)


def cm_eer(scores: TrialScoreSet) -> Tuple[float, float]:
    """CM EER: bona fide (target, nontarget, bonafide) against spoof."""
    return eer(scores, BONAFIDE_CLASSES, SPOOF)


def asv_eer(scores: TrialScoreSet) -> Tuple[float, float]:
    """ASV EER: target against nontarget, spoofs excluded."""
    return eer(scores, TARGET, NONTARGET)


def dcf(scores: TrialScoreSet, tau: float, cost: TandemCostModel) -> float:
    """C_miss pi_tar P_miss(tau) + C_fa (1 - pi_tar) P_fa(tau) on target/nontarget trials."""
    p_miss, p_fa = error_rates(scores, tau, TARGET, NONTARGET)
    return cost.c_miss * cost.pi_tar * p_miss + cost.c_fa * (1.0 - cost.pi_tar) * p_fa


def min_dcf(scores: TrialScoreSet, cost: TandemCostModel) -> Tuple[float, float]:
    """(min DCF, minimizing threshold) over the midpoint sweep."""
    positives, negatives = split_classes(scores, TARGET, NONTARGET)
    thresholds, p_miss, p_fa = rate_curves(positives, negatives)
    curve = cost.c_miss * cost.pi_tar * p_miss + cost.c_fa * (1.0 - cost.pi_tar) * p_fa
    i = int(np.argmin(curve))
    return float(curve[i]), float(thresholds[i])
