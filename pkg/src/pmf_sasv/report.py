"""
Report - Metric tables and CSV exports for the eval command.
"""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .labels import TrialClass
from .metrics.bootstrap import MetricEstimate
from .metrics.scores import TrialScoreSet
from .metrics.tandem import AttackRow, TdcfMinimum

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetricRow:
    metric: str
    scope: str
    value: float
    ci_low: Optional[float] = None
    ci_high: Optional[float] = None

    @classmethod
    def from_estimate(cls, metric: str, scope: str, estimate: MetricEstimate) -> "MetricRow":
        return cls(metric=metric, scope=scope, value=estimate.value,
                   ci_low=estimate.ci_low, ci_high=estimate.ci_high)


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    if math.isnan(value):
        return "nan"
    return f"{value:.6f}"


def format_table(rows: Sequence[MetricRow]) -> str:
    """Aligned plain-text table, one metric per line."""
    header = ("metric", "scope", "value", "95% CI")
    body = []
    for r in rows:
        ci = f"[{_fmt(r.ci_low)}, {_fmt(r.ci_high)}]" if r.ci_low is not None else "-"
        body.append((r.metric, r.scope, _fmt(r.value), ci))
    widths = [max(len(line[i]) for line in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip() for line in [header] + body]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_metrics_csv(rows: Iterable[MetricRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = list(rows)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["metric", "scope", "value", "ci_low", "ci_high"])
        for r in rows:
            writer.writerow([r.metric, r.scope, _fmt(r.value), _fmt(r.ci_low), _fmt(r.ci_high)])
    logger.info(f"Wrote {len(rows)} metric rows to {path}")
    return path


def write_attack_csv(rows: Sequence[AttackRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["attack_id", "n_trials", "cm_eer", "asv_spoof_fa"])
        for r in rows:
            writer.writerow([r.attack_id, r.n_trials, _fmt(r.cm_eer), _fmt(r.asv_spoof_fa)])
    return path


def write_surface_csv(
    path,
    cm_grid: np.ndarray,
    asv_grid: np.ndarray,
    matrix: np.ndarray,
    minimum: TdcfMinimum,
    eer_point: Optional[TdcfMinimum] = None,
) -> Path:
    """
    Normalized t-DCF surface as ``kind,tau_cm,tau_asv,tdcf`` rows.

    ``kind`` is ``grid`` for surface points, ``min`` for the minimum and
    ``eer`` for the operating point at both EER thresholds.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["kind", "tau_cm", "tau_asv", "tdcf"])
        for i, tau_cm in enumerate(cm_grid):
            for j, tau_asv in enumerate(asv_grid):
                writer.writerow(["grid", repr(float(tau_cm)), repr(float(tau_asv)), _fmt(float(matrix[i, j]))])
        writer.writerow(["min", repr(minimum.tau_cm), repr(minimum.tau_asv), _fmt(minimum.value)])
        if eer_point is not None:
            writer.writerow(["eer", repr(eer_point.tau_cm), repr(eer_point.tau_asv), _fmt(eer_point.value)])
    logger.info(f"Wrote {matrix.size}-point t-DCF surface to {path}")
    return path


def score_histograms(scores: TrialScoreSet, attacks: Mapping[str, str], bins: int = 50):
    """
    Per-group score histograms over common bin edges.

    Groups are ``target``, ``nontarget``, ``bonafide`` (when present) and
    ``spoof:<attack_id>``.
    """
    edges = np.linspace(float(scores.scores.min()), float(scores.scores.max()), bins + 1)
    if edges[0] == edges[-1]:
        edges = np.linspace(edges[0] - 0.5, edges[0] + 0.5, bins + 1)
    groups = {}
    for cls in (TrialClass.TARGET, TrialClass.NONTARGET, TrialClass.BONAFIDE):
        mask = scores.mask([cls])
        if mask.any():
            groups[cls.value] = scores.scores[mask]
    spoof_idx = np.flatnonzero(scores.mask([TrialClass.SPOOF]))
    for attack_id in sorted({attacks.get(scores.trial_ids[i], "-") for i in spoof_idx}):
        idx = [i for i in spoof_idx if attacks.get(scores.trial_ids[i], "-") == attack_id]
        groups[f"spoof:{attack_id}"] = scores.scores[idx]

    centers = (edges[:-1] + edges[1:]) / 2.0
    return centers, {name: np.histogram(values, bins=edges)[0] / values.size for name, values in groups.items()}


def write_score_pmf_csv(path, scores: TrialScoreSet, attacks: Mapping[str, str], bins: int = 50) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    centers, hist = score_histograms(scores, attacks, bins)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["group", "score", "probability"])
        for name, probs in hist.items():
            for c, p in zip(centers, probs):
                writer.writerow([name, repr(float(c)), _fmt(float(p))])
    return path


def mismatch_indicators(trial_ids: Sequence[str], true_genders: Sequence[str], recognised: Sequence[str]) -> TrialScoreSet:
    """Score 1.0 where the recognised gender differs from the true one; the mean is the mismatch rate."""
    wrong = np.asarray(true_genders, dtype=object) != np.asarray(recognised, dtype=object)
    return TrialScoreSet(
        scores=wrong.astype(np.float64),
        classes=[TrialClass.BONAFIDE.value] * wrong.size,
        genders=true_genders,
        trial_ids=trial_ids,
    )
