"""
GBDT - Gradient-boosted regression trees on the logistic loss.

Second-order (Newton) boosting: split gain is

    G_L^2 / (H_L + lambda) + G_R^2 / (H_R + lambda) - G^2 / (H + lambda)

and a leaf's weight is -G / (H + lambda). Features are quantized into at
most ``max_bins`` bins; candidate thresholds are midpoints between
consecutive distinct values (or quantile cuts when there are more). Rows go
left when ``x < threshold``. Ties between equally good splits keep the first
feature and the lowest threshold.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import expit, logit

from ..errors import ConfigError
from .dataset import Dataset, FeatureLayout
from .models import ModelKind, TrainedModel

logger = logging.getLogger(__name__)

LEAF = -1


class BadTreeConfigError(ConfigError):
    """Tree count or depth below 1."""


class GbdtConfig(BaseModel):
    """``[gbdt]`` config section."""
    n_trees: int = Field(100, ge=1)
    max_depth: int = Field(3, ge=1)
    lr: float = Field(0.1, gt=0)
    reg_lambda: float = Field(1.0, ge=0)
    min_child_weight: float = Field(1e-3, ge=0)
    max_bins: int = Field(256, ge=2)
    subsample: float = Field(1.0, gt=0, le=1)
    seed: Optional[int] = None


def candidate_thresholds(column: np.ndarray, max_bins: int) -> np.ndarray:
    """Split thresholds for one feature, at most ``max_bins - 1`` of them."""
    distinct = np.unique(column)
    if distinct.size <= 1:
        return np.empty(0)
    if distinct.size <= max_bins:
        return distinct[:-1] + (distinct[1:] - distinct[:-1]) / 2.0
    cuts = np.quantile(column, np.linspace(0.0, 1.0, max_bins + 1)[1:-1])
    return np.unique(cuts)


@dataclass
class _Tree:
    feature: List[int] = field(default_factory=list)
    threshold: List[float] = field(default_factory=list)
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    value: List[float] = field(default_factory=list)

    def add(self, feature=LEAF, threshold=0.0, value=0.0) -> int:
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        return len(self.feature) - 1


class _TreeBuilder:
    def __init__(self, binned: np.ndarray, thresholds: List[np.ndarray], config: GbdtConfig):
        self.binned = binned
        self.thresholds = thresholds
        self.config = config

    def best_split(self, rows: np.ndarray, g: np.ndarray, h: np.ndarray):
        lam = self.config.reg_lambda
        G, H = g[rows].sum(), h[rows].sum()
        parent = G * G / (H + lam)
        best = (0.0, None, None)
        for f, cuts in enumerate(self.thresholds):
            if cuts.size == 0:
                continue
            bins = self.binned[rows, f]
            g_hist = np.bincount(bins, weights=g[rows], minlength=cuts.size + 1)
            h_hist = np.bincount(bins, weights=h[rows], minlength=cuts.size + 1)
            GL = np.cumsum(g_hist)[:-1]
            HL = np.cumsum(h_hist)[:-1]
            GR, HR = G - GL, H - HL
            gain = GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent
            valid = (HL >= self.config.min_child_weight) & (HR >= self.config.min_child_weight)
            gain = np.where(valid, gain, -np.inf)
            t = int(np.argmax(gain))
            if gain[t] > best[0]:
                best = (float(gain[t]), f, t)
        return best

    def build(self, rows: np.ndarray, g: np.ndarray, h: np.ndarray) -> _Tree:
        tree = _Tree()
        self._grow(tree, rows, g, h, depth=0)
        return tree

    def _grow(self, tree: _Tree, rows, g, h, depth: int) -> int:
        lam = self.config.reg_lambda
        leaf_value = -g[rows].sum() / (h[rows].sum() + lam) * self.config.lr
        if depth >= self.config.max_depth or rows.size < 2:
            return tree.add(value=leaf_value)
        gain, f, t = self.best_split(rows, g, h)
        if f is None:
            return tree.add(value=leaf_value)

        node = tree.add(feature=f, threshold=float(self.thresholds[f][t]))
        goes_left = self.binned[rows, f] <= t
        tree.left[node] = self._grow(tree, rows[goes_left], g, h, depth + 1)
        tree.right[node] = self._grow(tree, rows[~goes_left], g, h, depth + 1)
        return node


def _pack(trees: List[_Tree]) -> dict:
    """Concatenate trees into flat arrays with per-tree root offsets."""
    roots, feature, threshold, left, right, value = [], [], [], [], [], []
    offset = 0
    for tree in trees:
        roots.append(offset)
        feature.extend(tree.feature)
        threshold.extend(tree.threshold)
        left.extend(c + offset if c != LEAF else LEAF for c in tree.left)
        right.extend(c + offset if c != LEAF else LEAF for c in tree.right)
        value.extend(tree.value)
        offset += len(tree.feature)
    return {
        "roots": np.array(roots, dtype=np.int64),
        "feature": np.array(feature, dtype=np.int64),
        "threshold": np.array(threshold, dtype=np.float64),
        "left": np.array(left, dtype=np.int64),
        "right": np.array(right, dtype=np.int64),
        "value": np.array(value, dtype=np.float64),
    }


def _raw_margin(parameters: dict, X: np.ndarray) -> np.ndarray:
    feature, threshold = parameters["feature"], parameters["threshold"]
    left, right, value = parameters["left"], parameters["right"], parameters["value"]
    margin = np.full(X.shape[0], float(parameters["base"][0]))
    rows = np.arange(X.shape[0])
    for root in parameters["roots"]:
        node = np.full(X.shape[0], root, dtype=np.int64)
        active = feature[node] != LEAF
        while active.any():
            idx = np.flatnonzero(active)
            n = node[idx]
            go_left = X[rows[idx], feature[n]] < threshold[n]
            node[idx] = np.where(go_left, left[n], right[n])
            active = feature[node] != LEAF
        margin += value[node]
    return margin


def train_gbdt(data: Dataset, n_trees: int = 100, max_depth: int = 3, lr: float = 0.1,
               seed: int = 0, config: Optional[GbdtConfig] = None) -> TrainedModel:
    """
    Train boosted trees on the logistic loss.

    Args:
        data: Training rows (flattened if grouped)
        n_trees: Number of trees (>= 1)
        max_depth: Depth limit (>= 1)
        lr: Shrinkage applied to leaf weights
        seed: Seed for row subsampling
        config: Remaining hyperparameters; its n_trees/max_depth/lr are
            overridden by the explicit arguments

    Raises:
        BadTreeConfigError: n_trees < 1 or max_depth < 1
        SingleClassDataError: Only one label present
    """
    if n_trees < 1 or max_depth < 1:
        raise BadTreeConfigError(f"Need n_trees >= 1 and max_depth >= 1, got {n_trees} and {max_depth}")
    base_config = config or GbdtConfig()
    config = base_config.model_copy(update={"n_trees": n_trees, "max_depth": max_depth, "lr": lr, "seed": seed})
    data.require_two_classes()

    X = data.flat_features()
    y = data.labels.astype(np.float64)
    thresholds = [candidate_thresholds(X[:, f], config.max_bins) for f in range(X.shape[1])]
    binned = np.column_stack([
        np.searchsorted(cuts, X[:, f], side="right") for f, cuts in enumerate(thresholds)
    ]).astype(np.int64)

    base = float(logit(np.clip(y.mean(), 1e-6, 1 - 1e-6)))
    margin = np.full(y.size, base)
    rng = np.random.default_rng(seed)
    builder = _TreeBuilder(binned, thresholds, config)
    all_rows = np.arange(y.size)

    trees = []
    for i in range(n_trees):
        p = expit(margin)
        g = p - y
        h = p * (1.0 - p)
        rows = all_rows
        if config.subsample < 1.0:
            size = max(2, int(round(config.subsample * y.size)))
            rows = np.sort(rng.choice(y.size, size=size, replace=False))
        tree = builder.build(rows, g, h)
        trees.append(tree)
        margin += _raw_margin({**_pack([tree]), "base": np.array([0.0])}, X)

    parameters = _pack(trees)
    parameters["base"] = np.array([base])
    accuracy = float(np.mean((margin >= 0) == (y == 1)))
    logger.info(f"Trained {n_trees} trees (depth {max_depth}) on {len(data)} rows, train accuracy {accuracy:.4f}")
    return TrainedModel(
        kind=ModelKind.GBDT,
        parameters=parameters,
        layout=FeatureLayout.FLAT,
        feature_shape=(X.shape[1],),
        config={"kind": ModelKind.GBDT.value, **config.model_dump()},
    )


def predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return expit(_raw_margin(model.parameters, X.reshape(X.shape[0], -1)))


def first_split(model: TrainedModel):
    """(feature, threshold) of the first tree's root, or None for a stump leaf."""
    p = model.parameters
    root = int(p["roots"][0])
    if p["feature"][root] == LEAF:
        return None
    return int(p["feature"][root]), float(p["threshold"][root])
