"""
Logistic Regression - Full-batch gradient descent on standardized features.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import expit

from ..errors import ConfigError
from .dataset import Dataset, FeatureLayout
from .models import ModelKind, TrainedModel

logger = logging.getLogger(__name__)


class LogRegConfig(BaseModel):
    """``[logreg]`` config section."""
    l2: float = Field(1e-3, ge=0)
    epochs: int = Field(500, ge=0)
    lr: float = Field(0.1, gt=0)
    seed: Optional[int] = None


def logistic_loss_and_grad(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                           l2: float) -> Tuple[float, np.ndarray, float]:
    """
    Mean logistic loss plus 0.5 * l2 * ||w||^2.

    Returns:
        (loss, d loss / d w, d loss / d b)
    """
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
    residual = (expit(z) - y) / y.size
    return loss, X.T @ residual + l2 * w, float(residual.sum())


def standardize_stats(X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def train_logreg(data: Dataset, l2: float = 1e-3, epochs: int = 500, lr: float = 0.1,
                 seed: int = 0) -> TrainedModel:
    """
    Train a logistic-regression classifier.

    Raises:
        SingleClassDataError: Only one label present
        NonFiniteFeatureError: Raised when the dataset is built
        ConfigError: Negative l2
    """
    data.require_two_classes()
    if l2 < 0:
        raise ConfigError(f"l2 must be non-negative, got {l2}")

    X = data.flat_features()
    y = data.labels.astype(np.float64)
    mean, std = standardize_stats(X)
    Xs = (X - mean) / std

    rng = np.random.default_rng(seed)
    w = rng.uniform(-0.01, 0.01, size=Xs.shape[1])
    b = 0.0
    loss = float("nan")
    for epoch in range(epochs):
        loss, grad_w, grad_b = logistic_loss_and_grad(w, b, Xs, y, l2)
        w -= lr * grad_w
        b -= lr * grad_b
        if (epoch + 1) % 100 == 0:
            logger.debug(f"logreg epoch {epoch + 1}/{epochs}: loss {loss:.6f}")

    config = {"kind": ModelKind.LOGISTIC_REGRESSION.value, "l2": l2, "epochs": epochs, "lr": lr, "seed": seed}
    logger.info(f"Trained logistic regression on {len(data)} rows ({epochs} epochs, final loss {loss:.6f})")
    return TrainedModel(
        kind=ModelKind.LOGISTIC_REGRESSION,
        parameters={"w": w, "b": np.array([b]), "mean": mean, "std": std},
        layout=FeatureLayout.FLAT,
        feature_shape=(X.shape[1],),
        config=config,
    )


def predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    p = model.parameters
    Xs = (X.reshape(X.shape[0], -1) - p["mean"]) / p["std"]
    return expit(Xs @ p["w"] + p["b"][0])
