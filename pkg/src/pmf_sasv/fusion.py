"""
Fusion - Combine the time-embedding CM with an external CM.

Both streams are mapped to [0, 1] first (symmetric [-1, 1] scores via
(s + 1) / 2). Weighted fusion is S = alpha * S_gd + (1 - alpha) * S_ext;
classifier fusion trains a flat classifier on the (S_gd, S_ext) pairs.
"""

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from .classifiers.dataset import Dataset
from .classifiers.models import ModelKind, ScoreRange, TrainedModel, train_flat_classifier
from .errors import ConfigError, DataError
from .labels import BONAFIDE_CLASSES, TrialClass
from .metrics.rates import cm_eer, eer_from_arrays
from .metrics.scores import TrialScoreSet, UnpairedTrialsError

logger = logging.getLogger(__name__)

RANGE_TOLERANCE = 1e-9


class OutOfDeclaredRangeError(DataError):
    """Score lies outside the range its stream declares."""


class BadAlphaError(ConfigError):
    """Fusion weight outside [0, 1] or grid step outside (0, 0.5]."""


class FusionMethod(str, Enum):
    WEIGHTED_AVERAGE = "weighted_average"
    CLASSIFIER = "classifier"


class FusionConfig(BaseModel):
    """``[fusion]`` config section."""
    method: FusionMethod = FusionMethod.WEIGHTED_AVERAGE
    alpha: Optional[float] = Field(None, ge=0, le=1)
    grid_step: float = Field(0.01, gt=0, le=0.5)
    gd_range: ScoreRange = ScoreRange.UNIT
    external_range: ScoreRange = ScoreRange.UNIT
    classifier_kind: ModelKind = ModelKind.LOGISTIC_REGRESSION
    grid_logistic_regression: List[Dict[str, Any]] = Field(
        default_factory=lambda: [{"l2": 1e-4}, {"l2": 1e-3}, {"l2": 1e-2}]
    )
    grid_gbdt: List[Dict[str, Any]] = Field(
        default_factory=lambda: [{"n_trees": 50, "max_depth": 2}, {"n_trees": 100, "max_depth": 3}]
    )
    tune_on: str = Field("dev", pattern="^(dev|eval)$")
    seed: Optional[int] = None

    def grid(self) -> List[Dict[str, Any]]:
        if self.classifier_kind is ModelKind.GBDT:
            return self.grid_gbdt
        return self.grid_logistic_regression


def map_to_unit(scores, score_range: ScoreRange):
    """
    Map scores to [0, 1].

    Raises:
        OutOfDeclaredRangeError: A score is outside its declared range by more than 1e-9
    """
    s = np.asarray(scores, dtype=np.float64)
    low = -1.0 if ScoreRange(score_range) is ScoreRange.SYMMETRIC else 0.0
    bad = (s < low - RANGE_TOLERANCE) | (s > 1.0 + RANGE_TOLERANCE) | ~np.isfinite(s)
    if np.any(bad):
        first = float(s[bad].ravel()[0])
        raise OutOfDeclaredRangeError(f"Score {first!r} outside declared {ScoreRange(score_range).value} range")
    s = np.clip(s, low, 1.0)
    mapped = (s + 1.0) / 2.0 if low < 0 else s
    return float(mapped) if mapped.ndim == 0 else mapped


def map_set_to_unit(scores: TrialScoreSet, score_range: ScoreRange) -> TrialScoreSet:
    return scores.with_scores(map_to_unit(scores.scores, score_range))


def _check_alpha(alpha: float):
    if not 0.0 <= alpha <= 1.0:
        raise BadAlphaError(f"alpha must lie in [0, 1], got {alpha}")


def fuse_weighted(s_gd, s_ext, alpha: float):
    """Convex combination alpha * s_gd + (1 - alpha) * s_ext; works on scalars and arrays."""
    _check_alpha(alpha)
    if alpha == 1.0:
        return s_gd
    if alpha == 0.0:
        return s_ext
    return alpha * s_gd + (1.0 - alpha) * s_ext


def alpha_grid(step: float) -> np.ndarray:
    """0, step, 2*step, ... with 1 always included."""
    if not 0.0 < step <= 0.5:
        raise BadAlphaError(f"grid step must lie in (0, 0.5], got {step}")
    k = int(np.floor(1.0 / step + 1e-9))
    return np.unique(np.minimum(np.append(np.arange(k + 1) * step, 1.0), 1.0))


def pair_streams(cm_gd: TrialScoreSet, cm_ext: TrialScoreSet) -> Tuple[TrialScoreSet, TrialScoreSet]:
    """Align the external stream to the time-embedding stream's trial order."""
    if len(cm_gd) != len(cm_ext):
        raise UnpairedTrialsError(f"Streams have {len(cm_gd)} and {len(cm_ext)} trials")
    return cm_gd, cm_ext.aligned_to(list(cm_gd.trial_ids))


@dataclass(frozen=True)
class AlphaSweep:
    alphas: np.ndarray
    eers: np.ndarray
    best_alpha: float
    best_eer: float


def sweep_alpha(cm_gd: TrialScoreSet, cm_ext: TrialScoreSet, grid_step: float = 0.01) -> AlphaSweep:
    """
    CM EER of the weighted fusion at every alpha on the grid.

    Both sets must already be unit-mapped. Ties go to the smallest alpha.

    Raises:
        UnpairedTrialsError: Trial ids differ between the streams
        BadAlphaError: grid_step outside (0, 0.5]
    """
    gd, ext = pair_streams(cm_gd, cm_ext)
    alphas = alpha_grid(grid_step)
    bona = gd.mask(BONAFIDE_CLASSES)
    eers = np.empty(alphas.size)
    for i, alpha in enumerate(alphas):
        fused = fuse_weighted(gd.scores, ext.scores, float(alpha))
        eers[i] = eer_from_arrays(fused[bona], fused[~bona])[0]
    best = int(np.argmin(eers))
    logger.info(f"Alpha sweep over {alphas.size} points: best alpha {alphas[best]:.4f}, EER {eers[best]:.4%}")
    return AlphaSweep(alphas=alphas, eers=eers, best_alpha=float(alphas[best]), best_eer=float(eers[best]))


def fuse_sets(cm_gd: TrialScoreSet, cm_ext: TrialScoreSet, alpha: float) -> TrialScoreSet:
    gd, ext = pair_streams(cm_gd, cm_ext)
    return gd.with_scores(fuse_weighted(gd.scores, ext.scores, alpha))


def write_sweep_csv(path, tuning: AlphaSweep, evaluation: Optional[AlphaSweep] = None) -> Path:
    """Columns: alpha, dev_eer, eval_eer (eval column empty without an evaluation sweep)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["alpha", "dev_eer", "eval_eer"])
        for i, alpha in enumerate(tuning.alphas):
            eval_eer = "" if evaluation is None else f"{evaluation.eers[i]:.6f}"
            writer.writerow([f"{alpha:.4f}", f"{tuning.eers[i]:.6f}", eval_eer])
    logger.info(f"Wrote alpha sweep to {path}")
    return path


def pair_dataset(cm_gd: TrialScoreSet, cm_ext: TrialScoreSet) -> Dataset:
    """Two-feature rows (s_gd, s_ext) labeled 1 for bona fide, 0 for spoof."""
    gd, ext = pair_streams(cm_gd, cm_ext)
    labels = np.array([int(TrialClass(c).is_bonafide) for c in gd.classes], dtype=np.int64)
    return Dataset(
        features=np.column_stack([gd.scores, ext.scores]),
        labels=labels,
        genders=gd.genders,
        source_ids=gd.trial_ids,
    )


def fuse_classifier(
    train_pairs: Dataset,
    eval_pairs: Dataset,
    kind: ModelKind = ModelKind.LOGISTIC_REGRESSION,
    hyperparams: Optional[Dict[str, Any]] = None,
    seed: int = 0,
    template: Optional[TrialScoreSet] = None,
    base: Optional[BaseModel] = None,
) -> TrialScoreSet:
    """
    Train a classifier on score pairs and score the evaluation pairs.

    Args:
        train_pairs: (s_gd, s_ext) rows with bona fide labels
        eval_pairs: Rows to score
        kind: logistic_regression or gbdt
        hyperparams: Classifier settings
        seed: Training seed
        template: Score set supplying classes, genders and trial ids of the
            evaluation rows; without it, classes follow the row labels
        base: Classifier config section the hyperparameters override
    """
    model = train_flat_classifier(kind, train_pairs, hyperparams or {}, seed, base)
    return score_pairs(model, eval_pairs, template)


def score_pairs(model: TrainedModel, pairs: Dataset, template: Optional[TrialScoreSet]) -> TrialScoreSet:
    scores = model.score_batch(pairs.features)
    if template is not None:
        return template.aligned_to(list(pairs.source_ids)).with_scores(scores)
    classes = [TrialClass.BONAFIDE.value if y else TrialClass.SPOOF.value for y in pairs.labels]
    return TrialScoreSet(scores=scores, classes=classes, genders=pairs.genders, trial_ids=pairs.source_ids)


def tune_fusion_classifier(
    train_pairs: Dataset,
    tune_pairs: Dataset,
    kind: ModelKind,
    grid: Sequence[Dict[str, Any]],
    seed: int = 0,
    base: Optional[BaseModel] = None,
) -> Tuple[Dict[str, Any], float, TrainedModel]:
    """
    Pick the grid entry whose model has the lowest EER on ``tune_pairs``.

    Ties go to the earlier entry.
    """
    if not grid:
        raise ConfigError("Fusion classifier grid is empty")
    best = None
    for candidate in grid:
        model = train_flat_classifier(kind, train_pairs, candidate, seed, base)
        scored = score_pairs(model, tune_pairs, None)
        value = cm_eer(scored)[0]
        logger.info(f"Fusion {ModelKind(kind).value} {candidate}: tuning EER {value:.4%}")
        if best is None or value < best[1]:
            best = (dict(candidate), value, model)
    return best
