"""
Score sets - Labeled detection scores and the score/tandem file formats.

Score file: ``trial_id gender class score`` per line.
Tandem file: ``trial_id gender class s_cm s_asv`` per line.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, Sequence

import numpy as np

from ..errors import DataError
from ..labels import BONAFIDE_CLASSES, Gender, TrialClass

logger = logging.getLogger(__name__)


class EmptyClassError(DataError):
    """A class needed by the metric has no trials."""


class MissingSpoofTrialsError(DataError):
    """Spoof trials are required but absent."""


class UnpairedTrialsError(DataError):
    """Two score streams do not cover the same trial ids."""


class ScoreFileError(DataError):
    """Score file line cannot be parsed."""


def _as_classes(values) -> np.ndarray:
    return np.array([TrialClass(v).value for v in values], dtype=object)


def _as_genders(values) -> np.ndarray:
    return np.array([Gender(v).value for v in values], dtype=object)


def class_mask(classes: np.ndarray, wanted: Iterable[TrialClass]) -> np.ndarray:
    wanted_values = {TrialClass(w).value for w in wanted}
    return np.array([c in wanted_values for c in classes], dtype=bool)


@dataclass(frozen=True)
class TrialScoreSet:
    """Scores with class, gender and trial id per trial."""
    scores: np.ndarray
    classes: np.ndarray
    genders: np.ndarray
    trial_ids: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        n = scores.size
        if not (len(self.classes) == len(self.genders) == len(self.trial_ids) == n):
            raise DataError("Score set columns have different lengths")
        if not np.all(np.isfinite(scores)):
            raise DataError("Scores must be finite")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "classes", _as_classes(self.classes))
        object.__setattr__(self, "genders", _as_genders(self.genders))
        object.__setattr__(self, "trial_ids", np.asarray(self.trial_ids, dtype=object))

    @classmethod
    def from_arrays(cls, scores, classes, genders=None, trial_ids=None) -> "TrialScoreSet":
        n = len(scores)
        if genders is None:
            genders = [Gender.UNKNOWN.value] * n
        if trial_ids is None:
            trial_ids = [f"t{i:06d}" for i in range(n)]
        return cls(scores=scores, classes=classes, genders=genders, trial_ids=trial_ids)

    @classmethod
    def from_positive_negative(cls, positives, negatives, positive=TrialClass.TARGET,
                               negative=TrialClass.NONTARGET) -> "TrialScoreSet":
        positives = np.asarray(positives, dtype=np.float64)
        negatives = np.asarray(negatives, dtype=np.float64)
        classes = [TrialClass(positive).value] * positives.size + [TrialClass(negative).value] * negatives.size
        return cls.from_arrays(np.concatenate([positives, negatives]), classes)

    def __len__(self) -> int:
        return self.scores.size

    def mask(self, wanted: Iterable[TrialClass]) -> np.ndarray:
        return class_mask(self.classes, wanted)

    def class_scores(self, wanted: Iterable[TrialClass]) -> np.ndarray:
        return self.scores[self.mask(wanted)]

    @property
    def bonafide_scores(self) -> np.ndarray:
        return self.class_scores(BONAFIDE_CLASSES)

    @property
    def spoof_scores(self) -> np.ndarray:
        return self.class_scores([TrialClass.SPOOF])

    def take(self, index) -> "TrialScoreSet":
        index = np.asarray(index)
        return TrialScoreSet(
            scores=self.scores[index],
            classes=self.classes[index],
            genders=self.genders[index],
            trial_ids=self.trial_ids[index],
        )

    def select_gender(self, gender: Gender) -> "TrialScoreSet":
        return self.take(np.flatnonzero(self.genders == Gender(gender).value))

    def with_scores(self, scores) -> "TrialScoreSet":
        return TrialScoreSet(scores=scores, classes=self.classes, genders=self.genders, trial_ids=self.trial_ids)

    def index_of(self) -> Dict[str, int]:
        return {tid: i for i, tid in enumerate(self.trial_ids)}

    def aligned_to(self, trial_ids: Sequence[str]) -> "TrialScoreSet":
        """Reorder to ``trial_ids``; every id must be present."""
        lookup = self.index_of()
        missing = [t for t in trial_ids if t not in lookup]
        if missing:
            raise UnpairedTrialsError(f"{len(missing)} trials missing, e.g. {missing[0]!r}")
        return self.take(np.array([lookup[t] for t in trial_ids], dtype=np.int64))


@dataclass(frozen=True)
class TandemScoreSet:
    """Per-trial paired CM and ASV scores."""
    cm: np.ndarray
    asv: np.ndarray
    classes: np.ndarray
    genders: np.ndarray
    trial_ids: np.ndarray

    def __post_init__(self):
        cm = np.asarray(self.cm, dtype=np.float64)
        asv = np.asarray(self.asv, dtype=np.float64)
        n = cm.size
        if not (asv.size == len(self.classes) == len(self.genders) == len(self.trial_ids) == n):
            raise UnpairedTrialsError("Tandem columns have different lengths")
        if not (np.all(np.isfinite(cm)) and np.all(np.isfinite(asv))):
            raise DataError("Tandem scores must be finite")
        object.__setattr__(self, "cm", cm)
        object.__setattr__(self, "asv", asv)
        object.__setattr__(self, "classes", _as_classes(self.classes))
        object.__setattr__(self, "genders", _as_genders(self.genders))
        object.__setattr__(self, "trial_ids", np.asarray(self.trial_ids, dtype=object))

    @classmethod
    def pair(cls, cm: TrialScoreSet, asv: TrialScoreSet) -> "TandemScoreSet":
        """
        Join CM and ASV scores on trial id, in ASV order.

        Class and gender come from the ASV set; every ASV trial needs a CM score.
        """
        cm_aligned = cm.aligned_to(list(asv.trial_ids))
        return cls(cm=cm_aligned.scores, asv=asv.scores, classes=asv.classes,
                   genders=asv.genders, trial_ids=asv.trial_ids)

    def __len__(self) -> int:
        return self.cm.size

    def mask(self, wanted: Iterable[TrialClass]) -> np.ndarray:
        return class_mask(self.classes, wanted)

    def cm_set(self) -> TrialScoreSet:
        return TrialScoreSet(scores=self.cm, classes=self.classes, genders=self.genders, trial_ids=self.trial_ids)

    def asv_set(self) -> TrialScoreSet:
        return TrialScoreSet(scores=self.asv, classes=self.classes, genders=self.genders, trial_ids=self.trial_ids)

    def take(self, index) -> "TandemScoreSet":
        index = np.asarray(index)
        return TandemScoreSet(cm=self.cm[index], asv=self.asv[index], classes=self.classes[index],
                              genders=self.genders[index], trial_ids=self.trial_ids[index])

    def select_gender(self, gender: Gender) -> "TandemScoreSet":
        return self.take(np.flatnonzero(self.genders == Gender(gender).value))


# File I/O

def read_score_file(path) -> TrialScoreSet:
    path = Path(path)
    ids, genders, classes, scores = [], [], [], []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 4:
                raise ScoreFileError(f"{path}:{line_no}: expected 'trial_id gender class score'")
            try:
                genders.append(Gender.from_code(parts[1]).value)
                classes.append(TrialClass.parse(parts[2]).value)
                scores.append(float(parts[3]))
            except ValueError as e:
                raise ScoreFileError(f"{path}:{line_no}: {e}") from e
            ids.append(parts[0])
    return TrialScoreSet(scores=np.array(scores), classes=classes, genders=genders, trial_ids=ids)


def write_score_file(scores: TrialScoreSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{tid} {Gender(g).code} {c} {s:.17g}"
        for tid, g, c, s in zip(scores.trial_ids, scores.genders, scores.classes, scores.scores)
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    logger.debug(f"Wrote {len(lines)} scores to {path}")
    return path


def read_tandem_file(path) -> TandemScoreSet:
    path = Path(path)
    ids, genders, classes, cm, asv = [], [], [], [], []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) != 5:
                raise ScoreFileError(f"{path}:{line_no}: expected 'trial_id gender class s_cm s_asv'")
            try:
                genders.append(Gender.from_code(parts[1]).value)
                classes.append(TrialClass.parse(parts[2]).value)
                cm.append(float(parts[3]))
                asv.append(float(parts[4]))
            except ValueError as e:
                raise ScoreFileError(f"{path}:{line_no}: {e}") from e
            ids.append(parts[0])
    return TandemScoreSet(cm=np.array(cm), asv=np.array(asv), classes=classes, genders=genders, trial_ids=ids)


def write_tandem_file(tandem: TandemScoreSet, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"{tid} {Gender(g).code} {c} {a:.17g} {b:.17g}"
        for tid, g, c, a, b in zip(tandem.trial_ids, tandem.genders, tandem.classes, tandem.cm, tandem.asv)
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path
