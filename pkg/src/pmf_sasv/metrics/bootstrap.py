"""
Bootstrap - Percentile confidence intervals for score-set metrics.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, TypeVar

import numpy as np
from pydantic import BaseModel, Field

from ..errors import ConfigError, DataError, NumericError

logger = logging.getLogger(__name__)

S = TypeVar("S")


class BadBootstrapConfigError(ConfigError):
    """Too few resamples or alpha outside (0, 100)."""


class StatisticUndefinedOnResampleError(NumericError):
    """The statistic failed on a resampled set."""


class BootstrapConfig(BaseModel):
    """``[bootstrap]`` config section."""
    iterations: int = Field(1000, ge=100)
    alpha_percent: float = Field(5.0, gt=0, lt=100)
    stratified: bool = True
    seed: int | None = None


@dataclass(frozen=True)
class MetricEstimate:
    value: float
    ci_low: float
    ci_high: float
    n_bootstrap: int
    alpha_percent: float

    @property
    def brackets_value(self) -> bool:
        return self.ci_low - 1e-12 <= self.value <= self.ci_high + 1e-12

    def __str__(self) -> str:
        return f"{self.value:.6f} [{self.ci_low:.6f}, {self.ci_high:.6f}]"


def percentile_indices(m: int, alpha_percent: float):
    """0-based order-statistic indices of the [alpha/2, 100 - alpha/2] percentiles."""
    k = max(1, math.ceil(m * alpha_percent / 200.0))
    return k - 1, m - k


def resample_indices(classes: np.ndarray, rng: np.random.Generator, stratified: bool = True) -> np.ndarray:
    """Indices drawn with replacement; per class when stratified so no class empties."""
    n = len(classes)
    if not stratified:
        return rng.integers(0, n, size=n)
    parts = []
    for value in sorted(set(classes)):
        members = np.flatnonzero(classes == value)
        parts.append(members[rng.integers(0, members.size, size=members.size)])
    return np.concatenate(parts)


def bootstrap_ci(
    scores: S,
    statistic: Callable[[S], float],
    m: int = 1000,
    alpha_percent: float = 5.0,
    seed: int = 0,
    stratified: bool = True,
) -> MetricEstimate:
    """
    Percentile bootstrap of ``statistic`` over a score set.

    Resample i uses ``numpy.random.default_rng([seed, i])``, so results do
    not depend on evaluation order.

    Args:
        scores: A TrialScoreSet or TandemScoreSet (anything with ``classes`` and ``take``)
        statistic: Maps a score set to a real number
        m: Number of resamples (>= 100)
        alpha_percent: CI covers [alpha/2, 100 - alpha/2] percentiles
        seed: Base seed
        stratified: Resample within each class

    Raises:
        BadBootstrapConfigError: m < 100 or alpha outside (0, 100)
        StatisticUndefinedOnResampleError: statistic raised on a resample
    """
    if m < 100:
        raise BadBootstrapConfigError(f"Bootstrap needs at least 100 resamples, got {m}")
    if not 0.0 < alpha_percent < 100.0:
        raise BadBootstrapConfigError(f"alpha_percent must lie in (0, 100), got {alpha_percent}")

    value = float(statistic(scores))
    classes = np.asarray(scores.classes)
    samples = np.empty(m)
    for i in range(m):
        rng = np.random.default_rng([seed, i])
        resampled = scores.take(resample_indices(classes, rng, stratified))
        try:
            samples[i] = statistic(resampled)
        except DataError as e:
            raise StatisticUndefinedOnResampleError(f"Statistic undefined on resample {i}: {e}") from e

    samples.sort()
    lo, hi = percentile_indices(m, alpha_percent)
    estimate = MetricEstimate(
        value=value,
        ci_low=float(samples[lo]),
        ci_high=float(samples[hi]),
        n_bootstrap=m,
        alpha_percent=alpha_percent,
    )
    if not estimate.brackets_value:
        logger.warning(f"Bootstrap CI [{estimate.ci_low:.6g}, {estimate.ci_high:.6g}] excludes point value {value:.6g}")
    return estimate
