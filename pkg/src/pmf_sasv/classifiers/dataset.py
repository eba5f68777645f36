"""
Dataset - Feature matrices with binary labels for the classifiers.

Label conventions: CM task 1 = bona fide, 0 = spoof; gender task 1 = male,
0 = female.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from ..embedding import EmbeddingTable, flatten_matrix, group_matrix
from ..errors import DataError
from ..labels import Gender, TrialClass


class SingleClassDataError(DataError):
    """Training data holds only one label."""


class NonFiniteFeatureError(DataError):
    """Features contain NaN or infinite values."""


class LayoutMismatchError(DataError):
    """Feature layout does not match what the model expects."""


class FeatureLayout(str, Enum):
    FLAT = "flat"
    GROUPED = "grouped"


class Task(str, Enum):
    CM = "cm"
    GENDER = "gender"


@dataclass
class Dataset:
    """
    Rows of features with labels in {0, 1}.

    ``features`` is (n, d) for the flat layout and (n, groups, width) for the
    grouped layout.
    """
    features: np.ndarray
    labels: np.ndarray
    genders: np.ndarray = field(default=None)
    source_ids: np.ndarray = field(default=None)
    layout: FeatureLayout = FeatureLayout.FLAT

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        n = self.labels.size
        expected_ndim = 2 if self.layout is FeatureLayout.FLAT else 3
        if self.features.ndim != expected_ndim:
            raise LayoutMismatchError(
                f"{self.layout.value} layout needs {expected_ndim}-D features, got shape {self.features.shape}"
            )
        if self.features.shape[0] != n:
            raise DataError(f"{self.features.shape[0]} feature rows but {n} labels")
        if not np.all(np.isin(self.labels, (0, 1))):
            raise DataError("Labels must be 0 or 1")
        if not np.all(np.isfinite(self.features)):
            raise NonFiniteFeatureError("Features contain NaN or infinite values")
        if self.genders is None:
            self.genders = np.array([Gender.UNKNOWN.value] * n, dtype=object)
        else:
            self.genders = np.array([Gender(g).value for g in self.genders], dtype=object)
        if self.source_ids is None:
            self.source_ids = np.array([f"row{i:06d}" for i in range(n)], dtype=object)
        else:
            self.source_ids = np.asarray(self.source_ids, dtype=object)

    def __len__(self) -> int:
        return self.labels.size

    @property
    def feature_shape(self) -> tuple:
        return tuple(self.features.shape[1:])

    def class_counts(self) -> tuple:
        ones = int(self.labels.sum())
        return len(self) - ones, ones

    def require_two_classes(self):
        zeros, ones = self.class_counts()
        if zeros == 0 or ones == 0:
            raise SingleClassDataError(f"Training data has a single class ({zeros} zeros, {ones} ones)")

    def flat_features(self) -> np.ndarray:
        """(n, d) features; grouped rows are flattened back to channel-major order."""
        if self.layout is FeatureLayout.GROUPED:
            return flatten_matrix(self.features)
        return self.features

    def take(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            features=self.features[index],
            labels=self.labels[index],
            genders=self.genders[index],
            source_ids=self.source_ids[index],
            layout=self.layout,
        )

    def select_gender(self, gender: Gender) -> "Dataset":
        return self.take(np.flatnonzero(self.genders == Gender(gender).value))

    def grouped(self) -> "Dataset":
        """Grouped (16 x 10) view of a flat 160-dim embedding dataset."""
        if self.layout is FeatureLayout.GROUPED:
            return self
        return Dataset(features=group_matrix(self.features), labels=self.labels, genders=self.genders,
                       source_ids=self.source_ids, layout=FeatureLayout.GROUPED)


def labels_for(task: Task, trial_classes: Sequence[Optional[str]], genders: Sequence[str]) -> np.ndarray:
    if task is Task.CM:
        return np.array([int(TrialClass(c).is_bonafide) for c in trial_classes], dtype=np.int64)
    return np.array([int(Gender(g) is Gender.MALE) for g in genders], dtype=np.int64)


def dataset_from_table(table: EmbeddingTable, task: Task, layout: FeatureLayout = FeatureLayout.FLAT) -> Dataset:
    """
    Build a dataset from stored embeddings.

    Gender-task rows with unknown gender are dropped.
    """
    metas = table.meta
    keep = np.ones(len(metas), dtype=bool)
    if task is Task.GENDER:
        keep = np.array([m.gender != Gender.UNKNOWN.value for m in metas], dtype=bool)
    elif any(m.trial_class is None for m in metas):
        raise DataError("CM dataset needs a trial class for every embedding")

    kept = [m for m, k in zip(metas, keep) if k]
    labels = labels_for(task, [m.trial_class for m in kept], [m.gender for m in kept])
    data = Dataset(
        features=table.matrix[keep],
        labels=labels,
        genders=[m.gender for m in kept],
        source_ids=[m.source_id for m in kept],
    )
    return data.grouped() if layout is FeatureLayout.GROUPED else data
