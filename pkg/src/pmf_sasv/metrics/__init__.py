"""Detection metrics: EER, DCF, tandem t-DCF, a-DCF and bootstrap confidence intervals."""

from .bootstrap import BootstrapConfig, MetricEstimate, bootstrap_ci
from .costs import TandemCostModel
from .rates import asv_eer, cm_eer, dcf, eer, error_rates, min_dcf
from .scores import TandemScoreSet, TrialScoreSet, read_score_file, read_tandem_file, write_score_file, write_tandem_file
from .tandem import (
    adcf,
    asv_rates_at_eer,
    min_adcf,
    min_tdcf_asv_constrained,
    min_tdcf_unconstrained,
    tdcf_asv_constrained,
    tdcf_unconstrained,
    tdcf_unconstrained_normalized,
)

__all__ = [
    "BootstrapConfig",
    "MetricEstimate",
    "TandemCostModel",
    "TandemScoreSet",
    "TrialScoreSet",
    "adcf",
    "asv_eer",
    "asv_rates_at_eer",
    "bootstrap_ci",
    "cm_eer",
    "dcf",
    "eer",
    "error_rates",
    "min_adcf",
    "min_dcf",
    "min_tdcf_asv_constrained",
    "min_tdcf_unconstrained",
    "read_score_file",
    "read_tandem_file",
    "tdcf_asv_constrained",
    "tdcf_unconstrained",
    "tdcf_unconstrained_normalized",
    "write_score_file",
    "write_tandem_file",
]
