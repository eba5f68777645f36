"""
Similarity - The eight PMF similarity and divergence measures.

The ordinal order of ``MeasureId`` fixes the embedding layout. Divergences are
0 for identical inputs; Intersection and NormalizedCrossCorrelation are
similarities and equal 1 for identical inputs.
"""

import logging
import math
from enum import IntEnum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .errors import DataError, NumericError
from .pmf import BinCountMismatchError, Pmf

logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-6
_BLOCK = 256


class NotNormalizedError(DataError):
    """PMF mass deviates from 1 by more than the tolerance."""


class NonFiniteMeasureError(NumericError):
    """A measure evaluated to NaN or infinity (usually an unsmoothed KL input)."""


class MeasureId(IntEnum):
    QUADRATIC_CHI = 0
    NORMALIZED_CROSS_CORRELATION = 1
    HELLINGER = 2
    INTERSECTION = 3
    KULLBACK_LEIBLER = 4
    SYMMETRIC_KL = 5
    JENSEN_SHANNON = 6
    MODIFIED_KOLMOGOROV_SMIRNOV = 7

    @property
    def is_similarity(self) -> bool:
        return self in (MeasureId.NORMALIZED_CROSS_CORRELATION, MeasureId.INTERSECTION)

    @property
    def needs_smoothing(self) -> bool:
        return self in (MeasureId.KULLBACK_LEIBLER, MeasureId.SYMMETRIC_KL)


MEASURE_COUNT = len(MeasureId)


class SimilarityConfig(BaseModel):
    """Quadratic-chi parameters (``[similarity]`` config section)."""
    qc_window: int = Field(64, ge=0)
    qc_sigma: float = Field(16.0, gt=0)
    qc_m: float = Field(0.9, ge=0, lt=1)


def accurate_sum(values: np.ndarray) -> float:
    """Pairwise block sums combined with math.fsum."""
    values = np.ravel(values)
    if values.size <= _BLOCK:
        return math.fsum(values.tolist())
    pad = (-values.size) % _BLOCK
    if pad:
        values = np.concatenate([values, np.zeros(pad)])
    return math.fsum(values.reshape(-1, _BLOCK).sum(axis=1).tolist())


def _kl(p: np.ndarray, q: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(p / q), 0.0)
    return max(accurate_sum(terms), 0.0)


def kullback_leibler(p: np.ndarray, q: np.ndarray) -> float:
    return _kl(p, q)


def symmetric_kl(p: np.ndarray, q: np.ndarray) -> float:
    return _kl(p, q) + _kl(q, p)


def jensen_shannon(p: np.ndarray, q: np.ndarray) -> float:
    m = 0.5 * (p + q)
    value = 0.5 * _kl(p, m) + 0.5 * _kl(q, m)
    return min(max(value, 0.0), math.log(2.0))


def hellinger(p: np.ndarray, q: np.ndarray) -> float:
    # Normalized by sqrt(sum p * sum q) so identical inputs give exactly 0
    coefficient = accurate_sum(np.sqrt(p * q)) / math.sqrt(accurate_sum(p) * accurate_sum(q))
    return math.sqrt(max(0.0, 1.0 - coefficient))


def intersection(p: np.ndarray, q: np.ndarray) -> float:
    return accurate_sum(np.minimum(p, q)) / math.sqrt(accurate_sum(p) * accurate_sum(q))


def normalized_cross_correlation(p: np.ndarray, q: np.ndarray) -> float:
    """Pearson correlation of the two bin vectors at zero lag."""
    dp = p - accurate_sum(p) / p.size
    dq = q - accurate_sum(q) / q.size
    sp = accurate_sum(dp * dp)
    sq = accurate_sum(dq * dq)
    if sp == 0.0 and sq == 0.0:
        return 1.0
    if sp == 0.0 or sq == 0.0:
        return 0.0
    value = accurate_sum(dp * dq) / math.sqrt(sp * sq)
    return min(1.0, max(-1.0, value))


def modified_kolmogorov_smirnov(p: np.ndarray, q: np.ndarray) -> float:
    """Sup-norm distance between the binned CDFs."""
    return float(np.max(np.abs(np.cumsum(p - q))))


def qc_kernel(window: int, sigma: float) -> np.ndarray:
    offsets = np.arange(-window, window + 1, dtype=np.float64)
    return np.exp(-0.5 * (offsets / sigma) ** 2)


def quadratic_chi(p: np.ndarray, q: np.ndarray, config: SimilarityConfig) -> float:
    """
    Quadratic-chi distance with a banded Gaussian bin-similarity matrix.

    A[i, j] = exp(-(i - j)^2 / (2 sigma^2)) for |i - j| <= window, else 0.
    Bins whose normalizer vanishes contribute 0.
    """
    kernel = qc_kernel(config.qc_window, config.qc_sigma)
    z = np.maximum(np.convolve(p + q, kernel, mode="same"), 0.0)
    diff = p - q
    scaled = np.zeros_like(diff)
    positive = z > 0
    scaled[positive] = diff[positive] / z[positive] ** config.qc_m
    form = accurate_sum(scaled * np.convolve(scaled, kernel, mode="same"))
    return math.sqrt(max(form, 0.0))


def _check_pair(p: Pmf, q: Pmf):
    if p.bin_count != q.bin_count:
        raise BinCountMismatchError(f"PMF bin counts differ: {p.bin_count} vs {q.bin_count}")
    for name, pmf in (("p", p), ("q", q)):
        total = accurate_sum(pmf.bins)
        if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
            raise NotNormalizedError(f"PMF {name} sums to {total!r}")


def _evaluate(measure_id: MeasureId, p: np.ndarray, q: np.ndarray, config: SimilarityConfig) -> float:
    if measure_id is MeasureId.QUADRATIC_CHI:
        value = quadratic_chi(p, q, config)
    elif measure_id is MeasureId.NORMALIZED_CROSS_CORRELATION:
        value = normalized_cross_correlation(p, q)
    elif measure_id is MeasureId.HELLINGER:
        value = hellinger(p, q)
    elif measure_id is MeasureId.INTERSECTION:
        value = intersection(p, q)
    elif measure_id is MeasureId.KULLBACK_LEIBLER:
        value = kullback_leibler(p, q)
    elif measure_id is MeasureId.SYMMETRIC_KL:
        value = symmetric_kl(p, q)
    elif measure_id is MeasureId.JENSEN_SHANNON:
        value = jensen_shannon(p, q)
    else:
        value = modified_kolmogorov_smirnov(p, q)

    if not math.isfinite(value):
        raise NonFiniteMeasureError(
            f"{measure_id.name} evaluated to {value}; KL-family inputs must be smoothed"
        )
    return value


def measure(measure_id: MeasureId, p: Pmf, q: Pmf, config: Optional[SimilarityConfig] = None) -> float:
    """
    Evaluate one measure d_l(p, q).

    Inputs are used as given; KL-family measures need smoothed PMFs
    (see ``pmf.smooth_for_divergence``).

    Raises:
        BinCountMismatchError: p and q differ in bin count
        NotNormalizedError: Either input sums to 1 +- more than 1e-6
        NonFiniteMeasureError: The value is not finite
    """
    _check_pair(p, q)
    return _evaluate(MeasureId(measure_id), p.bins, q.bins, config or SimilarityConfig())


def measure_vector(
    p: Pmf,
    q: Pmf,
    config: Optional[SimilarityConfig] = None,
    smoothed: Optional[Tuple[Pmf, Pmf]] = None,
) -> np.ndarray:
    """
    All eight measures in ``MeasureId`` order.

    Args:
        p, q: PMFs to compare
        config: Quadratic-chi parameters
        smoothed: Optional smoothed versions of (p, q), used for the
            KL and symmetric-KL slots only
    """
    config = config or SimilarityConfig()
    _check_pair(p, q)
    if smoothed is not None:
        _check_pair(*smoothed)

    values = np.empty(MEASURE_COUNT)
    for measure_id in MeasureId:
        if smoothed is not None and measure_id.needs_smoothing:
            values[measure_id] = _evaluate(measure_id, smoothed[0].bins, smoothed[1].bins, config)
        else:
            values[measure_id] = _evaluate(measure_id, p.bins, q.bins, config)
    return values
