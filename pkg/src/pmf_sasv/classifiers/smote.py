"""
SMOTE - Borderline synthetic minority oversampling.

Seeds are the minority rows with at least one majority row among their k
nearest neighbours (over all rows); when no row qualifies every minority row
is a seed. Each synthetic row is x + u * (x_nn - x) for a seed x, one of its k
nearest minority neighbours x_nn and u drawn from (0, 1).
"""

import logging
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field
from sklearn.neighbors import NearestNeighbors

from ..errors import DataError
from .dataset import Dataset

logger = logging.getLogger(__name__)


class TooFewMinoritySamplesError(DataError):
    """Minority class has fewer than k_neighbors + 1 rows."""


class SmoteConfig(BaseModel):
    """``[smote]`` config section."""
    enabled: bool = True
    k_neighbors: int = Field(5, ge=1)
    seed: Optional[int] = None


def borderline_seeds(X: np.ndarray, labels: np.ndarray, minority: int, k_neighbors: int) -> np.ndarray:
    """Indices of minority rows whose k-neighbourhood contains a majority row."""
    minority_idx = np.flatnonzero(labels == minority)
    k = min(k_neighbors + 1, X.shape[0])
    nn = NearestNeighbors(n_neighbors=k).fit(X)
    _, neighbours = nn.kneighbors(X[minority_idx])
    border = []
    for row, hood in zip(minority_idx, neighbours):
        others = hood[hood != row][:k_neighbors]
        if np.any(labels[others] != minority):
            border.append(row)
    return np.array(border, dtype=np.int64)


def smote_oversample(data: Dataset, k_neighbors: int = 5, seed: int = 0) -> Dataset:
    """
    Oversample the minority class until both classes have the same count.

    Original rows come first, synthetic rows are appended. Balanced input is
    returned unchanged.

    Raises:
        TooFewMinoritySamplesError: Minority has fewer than k_neighbors + 1 rows
    """
    zeros, ones = data.class_counts()
    if zeros == ones:
        return data
    minority = 1 if ones < zeros else 0
    n_minority = min(zeros, ones)
    n_new = abs(zeros - ones)
    if n_minority < k_neighbors + 1:
        raise TooFewMinoritySamplesError(
            f"SMOTE with k={k_neighbors} needs at least {k_neighbors + 1} minority rows, got {n_minority}"
        )

    X = data.features.reshape(len(data), -1)
    minority_idx = np.flatnonzero(data.labels == minority)
    seeds = borderline_seeds(X, data.labels, minority, k_neighbors)
    if seeds.size == 0:
        logger.debug("No borderline minority rows; seeding from the whole minority class")
        seeds = minority_idx

    # Neighbours among minority rows, excluding the row itself
    nn = NearestNeighbors(n_neighbors=k_neighbors + 1).fit(X[minority_idx])
    _, hoods = nn.kneighbors(X[seeds])
    position = {int(r): i for i, r in enumerate(minority_idx)}
    neighbour_table = np.empty((seeds.size, k_neighbors), dtype=np.int64)
    for i, (row, hood) in enumerate(zip(seeds, hoods)):
        # Duplicates can push the row itself out of its own neighbour list
        others = hood[hood != position[int(row)]]
        neighbour_table[i] = minority_idx[others[:k_neighbors]]

    rng = np.random.default_rng(seed)
    pick = rng.integers(0, seeds.size, size=n_new)
    mate = neighbour_table[pick, rng.integers(0, k_neighbors, size=n_new)]
    u = rng.random(n_new)
    u = np.where(u > 0.0, u, 0.5)
    base = X[seeds[pick]]
    synthetic = base + u[:, None] * (X[mate] - base)

    logger.info(
        f"SMOTE: {n_new} synthetic rows for class {minority} from {seeds.size} seeds "
        f"({n_minority} minority, {len(data) - n_minority} majority)"
    )
    return Dataset(
        features=np.concatenate([data.features, synthetic.reshape((n_new,) + data.feature_shape)]),
        labels=np.concatenate([data.labels, np.full(n_new, minority, dtype=np.int64)]),
        genders=np.concatenate([data.genders, data.genders[seeds[pick]]]),
        source_ids=np.concatenate([data.source_ids, np.array([f"smote{i:06d}" for i in range(n_new)], dtype=object)]),
        layout=data.layout,
    )
