"""
Evaluation - Tandem metric suite per gender scope, with bootstrap CIs.

Scopes are ``male``, ``female`` and ``pooled``; ``pooled_gd`` adds the
constrained t-DCF of the pooled trials with each gender judged at its own ASV
EER threshold.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

from .errors import DataError, NumericError
from .labels import Gender
from .metrics.bootstrap import BootstrapConfig, StatisticUndefinedOnResampleError, bootstrap_ci
from .metrics.costs import TandemCostModel
from .metrics.rates import asv_eer, cm_eer, min_dcf
from .metrics.scores import TandemScoreSet
from .metrics.tandem import (
    NegativeC1Error,
    asv_rates_at_eer,
    asv_rates_with_thresholds,
    min_adcf,
    min_tdcf_asv_constrained,
    min_tdcf_unconstrained,
)
from .report import MetricRow

logger = logging.getLogger(__name__)

GENDERS = (Gender.MALE, Gender.FEMALE)


@dataclass
class EvalOptions:
    cost: TandemCostModel = field(default_factory=TandemCostModel)
    asv_cost: TandemCostModel = field(default_factory=TandemCostModel.asv_only)
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    seed: int = 0
    max_thresholds: Optional[int] = 2000
    # Joint-threshold grid inside bootstrap resamples; None reuses max_thresholds
    ci_max_thresholds: Optional[int] = None
    with_ci: bool = True


def constrained_tdcf(t: TandemScoreSet, cost: TandemCostModel) -> float:
    rates, _ = asv_rates_at_eer(t.asv_set())
    return min_tdcf_asv_constrained(t.cm_set(), rates, cost)[0]


def constrained_tdcf_gender_thresholds(t: TandemScoreSet, cost: TandemCostModel) -> float:
    """Pooled constrained t-DCF, ASV rates taken at each gender's own EER threshold."""
    asv = t.asv_set()
    thresholds = {g: asv_rates_at_eer(asv.select_gender(g))[1] for g in GENDERS}
    rates = asv_rates_with_thresholds(asv, thresholds)
    return min_tdcf_asv_constrained(t.cm_set(), rates, cost)[0]


def bootstrap_grid(opts: EvalOptions) -> Optional[int]:
    """Threshold cap used on resamples."""
    if opts.ci_max_thresholds is None:
        return opts.max_thresholds
    return opts.ci_max_thresholds


def _statistics(opts: EvalOptions, max_thresholds: Optional[int]):
    return {
        "cm_eer": lambda t: cm_eer(t.cm_set())[0],
        "asv_eer": lambda t: asv_eer(t.asv_set())[0],
        "asv_min_dcf": lambda t: min_dcf(t.asv_set(), opts.asv_cost)[0],
        "min_tdcf_constrained": lambda t: constrained_tdcf(t, opts.cost),
        "min_tdcf_unconstrained": lambda t: min_tdcf_unconstrained(
            t.cm_set(), t.asv_set(), opts.cost, True, max_thresholds).value,
        "min_adcf": lambda t: min_adcf(t, opts.cost, True, max_thresholds).value,
    }


def metric_row(name: str, scope: str, tandem: TandemScoreSet, point: Callable, resampled: Callable,
               opts: EvalOptions) -> Optional[MetricRow]:
    """
    One metric with its percentile CI, or None when the metric is undefined on the scope.

    A negative C1 yields a NaN row.
    """
    try:
        value = float(point(tandem))
    except NegativeC1Error as e:
        logger.warning(f"{name} ({scope}): {e}")
        return MetricRow(metric=name, scope=scope, value=float("nan"))
    except DataError as e:
        logger.warning(f"Skipping {name} ({scope}): {e}")
        return None

    if not opts.with_ci:
        return MetricRow(metric=name, scope=scope, value=value)
    try:
        estimate = bootstrap_ci(
            tandem, resampled,
            m=opts.bootstrap.iterations,
            alpha_percent=opts.bootstrap.alpha_percent,
            seed=opts.seed,
            stratified=opts.bootstrap.stratified,
        )
    except (StatisticUndefinedOnResampleError, NumericError) as e:
        logger.warning(f"No CI for {name} ({scope}): {e}")
        return MetricRow(metric=name, scope=scope, value=value)
    return MetricRow(metric=name, scope=scope, value=value, ci_low=estimate.ci_low, ci_high=estimate.ci_high)


def evaluate_tandem(tandem: TandemScoreSet, opts: Optional[EvalOptions] = None) -> List[MetricRow]:
    """
    Full metric table: every metric for male, female and pooled trials, then
    the pooled constrained t-DCF with gender-specific ASV thresholds.
    """
    opts = opts or EvalOptions()
    points = _statistics(opts, opts.max_thresholds)
    grid = bootstrap_grid(opts)
    if opts.with_ci and grid != opts.max_thresholds:
        logger.warning(
            f"Bootstrap resamples use a coarser threshold grid ({grid}) than the point values "
            f"({opts.max_thresholds}); t-DCF and a-DCF intervals may not bracket them"
        )
    resampled = _statistics(opts, grid)

    scopes = []
    for gender in GENDERS:
        part = tandem.select_gender(gender)
        if len(part):
            scopes.append((gender.value, part))
        else:
            logger.warning(f"No {gender.value} trials; skipping that scope")
    scopes.append(("pooled", tandem))

    rows = []
    for scope, part in scopes:
        for name in points:
            row = metric_row(name, scope, part, points[name], resampled[name], opts)
            if row is not None:
                rows.append(row)

    if all(len(tandem.select_gender(g)) for g in GENDERS):
        gd = lambda t: constrained_tdcf_gender_thresholds(t, opts.cost)  # noqa: E731
        row = metric_row("min_tdcf_constrained", "pooled_gd", tandem, gd, gd, opts)
        if row is not None:
            rows.append(row)
    return rows
