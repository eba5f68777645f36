"""
Losses - One-class softmax and binary cross-entropy, with gradients w.r.t. scores.
"""

from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import expit

from ..errors import ConfigError


class BadMarginsError(ConfigError):
    """One-class softmax margins or scale out of range."""


class OcSoftmaxConfig(BaseModel):
    """``[ocsoftmax]`` config section."""
    alpha_scale: float = Field(20.0, gt=0)
    m_target: float = Field(0.9, ge=-1, le=1)
    m_other: float = Field(0.2, ge=-1, le=1)

    @model_validator(mode="after")
    def _check(self):
        if self.m_other >= self.m_target:
            raise ValueError(f"m_other ({self.m_other}) must be below m_target ({self.m_target})")
        return self


def _check_margins(alpha_scale: float, m_target: float, m_other: float):
    if alpha_scale <= 0:
        raise BadMarginsError(f"alpha_scale must be positive, got {alpha_scale}")
    if not -1.0 <= m_other < m_target <= 1.0:
        raise BadMarginsError(f"Need -1 <= m_other < m_target <= 1, got m_other={m_other}, m_target={m_target}")


def oc_softmax_loss(
    scores,
    labels,
    alpha_scale: float = 20.0,
    m_target: float = 0.9,
    m_other: float = 0.2,
) -> Tuple[float, np.ndarray]:
    """
    Mean one-class softmax loss over cosine scores.

    Bona fide rows (label 1) cost softplus(alpha * (m_target - s)); spoof rows
    (label 0) cost softplus(alpha * (s - m_other)).

    Returns:
        (loss, d loss / d scores)
    """
    _check_margins(alpha_scale, m_target, m_other)
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    bona = y == 1
    margin = np.where(bona, m_target - s, s - m_other)
    z = alpha_scale * margin
    loss = float(np.mean(np.logaddexp(0.0, z)))
    dz_ds = np.where(bona, -alpha_scale, alpha_scale)
    grad = expit(z) * dz_ds / s.size
    return loss, grad


def bce_with_logits(logits, labels) -> Tuple[float, np.ndarray]:
    """Mean binary cross-entropy on logits; returns (loss, d loss / d logits)."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    return loss, (expit(z) - y) / z.size
