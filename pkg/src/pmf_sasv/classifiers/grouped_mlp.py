"""
Grouped MLP - Countermeasure network over the 16 measure/filter groups.

Each group of 10 channel values feeds its own dense layer (a); the 16 group
outputs are concatenated, merged by a dense layer (b) and projected by the
output layer (c). The residual variant adds a linear shortcut from the
concatenated group outputs around layer (b). Two heads are supported:

- sigmoid: one output unit, score = sigmoid(logit), trained with binary
  cross-entropy
- one_class_softmax: score = cos(output, center) in [-1, 1], trained with the
  one-class softmax loss

Training is plain mini-batch SGD with the learning rate multiplied by
``lr_decay`` once ``decay_at`` of the epochs have passed.
"""

import csv
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import expit

from ..errors import NumericError
from ..metrics.rates import eer_from_arrays
from .dataset import Dataset, FeatureLayout, LayoutMismatchError
from .losses import OcSoftmaxConfig, bce_with_logits, oc_softmax_loss
from .models import ModelKind, TrainedModel

logger = logging.getLogger(__name__)

GROUPS = 16
GROUP_FEATURES = 10
NORM_EPS = 1e-12


class DivergentLossError(NumericError):
    """Training loss became NaN or infinite."""

    def __init__(self, message: str, diagnostics: Dict[str, float]):
        self.diagnostics = diagnostics
        details = ", ".join(f"{k}={v:g}" for k, v in diagnostics.items())
        super().__init__(f"{message} ({details})")


class Variant(str, Enum):
    MALE = "male"
    FEMALE = "female"
    GENDER_INDEPENDENT = "gender_independent"


class Head(str, Enum):
    SIGMOID = "sigmoid"
    ONE_CLASS_SOFTMAX = "one_class_softmax"


class GroupedMlpSpec(BaseModel):
    """``[mlp_male]``, ``[mlp_female]`` and ``[mlp_gi]`` config sections."""
    variant: Variant = Variant.MALE
    group_width: int = Field(5, ge=1)
    merge_width: int = Field(40, ge=1)
    out_width: int = Field(1, ge=1)
    residual: bool = False
    head: Head = Head.SIGMOID
    dropout_p: float = Field(0.2, ge=0, lt=1)
    batch_size: int = Field(256, ge=1)
    epochs: int = Field(300, ge=0)
    learning_rate: float = Field(0.01, gt=0)
    lr_decay: float = Field(0.1, gt=0, le=1)
    decay_at: float = Field(0.8, gt=0, le=1)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def _check_head(self):
        if self.head is Head.SIGMOID and self.out_width != 1:
            raise ValueError(f"sigmoid head needs out_width 1, got {self.out_width}")
        return self

    @classmethod
    def preset(cls, variant: Variant, **overrides) -> "GroupedMlpSpec":
        return cls(**preset_fields(variant, overrides))


def preset_fields(variant: Variant, overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Field values of a variant preset with ``overrides`` applied on top."""
    variant = Variant(variant)
    if variant is Variant.MALE:
        base = dict(group_width=5, merge_width=40, out_width=1, residual=False,
                    head=Head.SIGMOID, batch_size=256, epochs=300)
    elif variant is Variant.FEMALE:
        base = dict(group_width=10, merge_width=40, out_width=48, residual=True,
                    head=Head.ONE_CLASS_SOFTMAX, batch_size=32, epochs=100)
    else:
        base = dict(group_width=10, merge_width=80, out_width=32, residual=True,
                    head=Head.ONE_CLASS_SOFTMAX, batch_size=128, epochs=200)
    return {**base, **(overrides or {}), "variant": variant}


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    limit = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-limit, limit, size=shape)


def init_parameters(spec: GroupedMlpSpec, seed: Optional[int] = None) -> Dict[str, np.ndarray]:
    """Fan-in uniform weights, zero biases."""
    if seed is None:
        seed = spec.seed or 0
    rng = np.random.default_rng(seed)
    a, b, c = spec.group_width, spec.merge_width, spec.out_width
    concat = GROUPS * a
    params = {
        "Wa": _uniform(rng, GROUP_FEATURES, (GROUPS, GROUP_FEATURES, a)),
        "ba": np.zeros((GROUPS, a)),
        "Wb": _uniform(rng, concat, (concat, b)),
        "bb": np.zeros(b),
        "Wc": _uniform(rng, b, (b, c)),
        "bc": np.zeros(c),
    }
    if spec.residual:
        params["R"] = _uniform(rng, concat, (concat, b))
    if spec.head is Head.ONE_CLASS_SOFTMAX:
        params["center"] = _uniform(rng, c, c)
    return params


def _dropout_mask(rng: Optional[np.random.Generator], shape, p: float):
    if rng is None or p == 0.0:
        return None
    return (rng.random(shape) >= p) / (1.0 - p)


def _cosine(u: np.ndarray, w: np.ndarray):
    nu = np.sqrt(np.einsum("nc,nc->n", u, u) + NORM_EPS)
    nw = math.sqrt(float(w @ w) + NORM_EPS)
    return (u @ w) / (nu * nw), nu, nw


def forward(params: Dict[str, np.ndarray], X: np.ndarray, residual: bool, head: Head,
            dropout_p: float = 0.0, rng: Optional[np.random.Generator] = None):
    """
    Network forward pass.

    Args:
        params: Parameter arrays as produced by init_parameters
        X: (n, 16, 10) grouped features
        residual: Whether the shortcut around the merge layer is present
        head: Output head
        dropout_p: Dropout probability, used only when ``rng`` is given
        rng: Source of dropout masks; None runs in inference mode

    Returns:
        (scores, cache) where scores are sigmoid probabilities or cosine scores
        and cache holds the intermediates needed for backprop
    """
    n = X.shape[0]
    z1 = np.einsum("ngk,gka->nga", X, params["Wa"]) + params["ba"]
    h1 = np.maximum(z1, 0.0).reshape(n, -1)
    m1 = _dropout_mask(rng, h1.shape, dropout_p)
    h1d = h1 if m1 is None else h1 * m1

    z2 = h1d @ params["Wb"] + params["bb"]
    h2 = np.maximum(z2, 0.0)
    if residual:
        h2 = h2 + h1d @ params["R"]
    m2 = _dropout_mask(rng, h2.shape, dropout_p)
    h2d = h2 if m2 is None else h2 * m2

    out = h2d @ params["Wc"] + params["bc"]
    cache = {"z1": z1, "m1": m1, "h1d": h1d, "z2": z2, "m2": m2, "h2d": h2d, "out": out}
    if head is Head.SIGMOID:
        return expit(out[:, 0]), cache
    s, nu, nw = _cosine(out, params["center"])
    cache.update(nu=nu, nw=nw, s=s)
    return s, cache


def loss_and_grads(
    params: Dict[str, np.ndarray],
    X: np.ndarray,
    y: np.ndarray,
    spec: GroupedMlpSpec,
    ocs: Optional[OcSoftmaxConfig] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """Loss on a batch and its gradient for every parameter. ``rng=None`` disables dropout."""
    ocs = ocs or OcSoftmaxConfig()
    n = X.shape[0]
    _, cache = forward(params, X, spec.residual, spec.head, spec.dropout_p, rng)
    out = cache["out"]
    grads = {}

    if spec.head is Head.SIGMOID:
        loss, dlogit = bce_with_logits(out[:, 0], y)
        dout = dlogit[:, None]
    else:
        w, s, nu, nw = params["center"], cache["s"], cache["nu"], cache["nw"]
        loss, ds = oc_softmax_loss(s, y, ocs.alpha_scale, ocs.m_target, ocs.m_other)
        # d s / d out and d s / d center of the cosine score
        dout = ds[:, None] * (w[None, :] / (nu * nw)[:, None] - (s / nu ** 2)[:, None] * out)
        grads["center"] = ((ds / (nu * nw)) @ out) - float(ds @ s) * w / nw ** 2

    grads["Wc"] = cache["h2d"].T @ dout
    grads["bc"] = dout.sum(axis=0)
    dh2 = dout @ params["Wc"].T
    if cache["m2"] is not None:
        dh2 = dh2 * cache["m2"]

    dz2 = dh2 * (cache["z2"] > 0)
    h1d = cache["h1d"]
    grads["Wb"] = h1d.T @ dz2
    grads["bb"] = dz2.sum(axis=0)
    dh1 = dz2 @ params["Wb"].T
    if spec.residual:
        grads["R"] = h1d.T @ dh2
        dh1 = dh1 + dh2 @ params["R"].T
    if cache["m1"] is not None:
        dh1 = dh1 * cache["m1"]

    dz1 = dh1.reshape(n, GROUPS, -1) * (cache["z1"] > 0)
    grads["Wa"] = np.einsum("ngk,nga->gka", X, dz1)
    grads["ba"] = dz1.sum(axis=0)
    return loss, grads


def _check_layout(data: Dataset):
    if data.layout is not FeatureLayout.GROUPED or data.feature_shape != (GROUPS, GROUP_FEATURES):
        raise LayoutMismatchError(
            f"Grouped MLP needs {GROUPS} x {GROUP_FEATURES} grouped rows, "
            f"got {data.layout.value} rows of shape {data.feature_shape}"
        )


def _dev_eer(params, dev: Dataset, spec: GroupedMlpSpec) -> float:
    scores, _ = forward(params, dev.features, spec.residual, spec.head)
    return eer_from_arrays(scores[dev.labels == 1], scores[dev.labels == 0])[0]


def train_grouped_mlp(
    data: Dataset,
    spec: GroupedMlpSpec,
    ocs: Optional[OcSoftmaxConfig] = None,
    dev: Optional[Dataset] = None,
    log_path=None,
) -> TrainedModel:
    """
    Train a grouped countermeasure network with mini-batch SGD.

    Args:
        data: Grouped (16 x 10) training rows, label 1 = bona fide
        spec: Architecture and optimizer settings
        ocs: One-class softmax margins (one_class_softmax head only)
        dev: Optional development rows; their EER is logged every epoch
        log_path: Optional CSV training log (epoch, loss, dev_eer)

    Raises:
        LayoutMismatchError: Rows are not grouped 16 x 10
        SingleClassDataError: Only one label present
        DivergentLossError: Loss became NaN or infinite
    """
    _check_layout(data)
    if dev is not None:
        _check_layout(dev)
        dev.require_two_classes()
    data.require_two_classes()
    ocs = ocs or OcSoftmaxConfig()

    seed = spec.seed or 0
    params = init_parameters(spec, seed)
    rng = np.random.default_rng([seed, 1])
    X, y = data.features, data.labels.astype(np.float64)
    decay_epoch = int(spec.decay_at * spec.epochs)
    report_every = max(1, spec.epochs // 10)
    rows = []

    for epoch in range(spec.epochs):
        lr = spec.learning_rate * (spec.lr_decay if epoch >= decay_epoch else 1.0)
        order = rng.permutation(len(data))
        total = 0.0
        for batch_no, start in enumerate(range(0, len(data), spec.batch_size)):
            idx = order[start:start + spec.batch_size]
            loss, grads = loss_and_grads(params, X[idx], y[idx], spec, ocs, rng)
            if not math.isfinite(loss):
                raise DivergentLossError(
                    f"Loss diverged in epoch {epoch + 1}",
                    {
                        "epoch": epoch + 1,
                        "batch": batch_no,
                        "lr": lr,
                        "max_abs_weight": max(float(np.max(np.abs(v))) for v in params.values()),
                    },
                )
            for name, g in grads.items():
                params[name] -= lr * g
            total += loss * idx.size

        epoch_loss = total / len(data)
        dev_eer = _dev_eer(params, dev, spec) if dev is not None else None
        rows.append((epoch + 1, epoch_loss, dev_eer))
        if (epoch + 1) % report_every == 0:
            suffix = f", dev EER {dev_eer:.4f}" if dev_eer is not None else ""
            logger.info(f"{spec.variant.value} CM epoch {epoch + 1}/{spec.epochs}: loss {epoch_loss:.6f}{suffix}")

    if log_path is not None:
        write_training_log(log_path, rows)

    config = {"kind": ModelKind.GROUPED_MLP.value, **spec.model_dump(mode="json")}
    if spec.head is Head.ONE_CLASS_SOFTMAX:
        config["ocsoftmax"] = ocs.model_dump()
    return TrainedModel(
        kind=ModelKind.GROUPED_MLP,
        parameters=params,
        layout=FeatureLayout.GROUPED,
        feature_shape=(GROUPS, GROUP_FEATURES),
        config=config,
    )


def write_training_log(path, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "loss", "dev_eer"])
        for epoch, loss, dev_eer in rows:
            writer.writerow([epoch, f"{loss:.8f}", "" if dev_eer is None else f"{dev_eer:.6f}"])
    logger.info(f"Wrote training log ({len(rows)} epochs) to {path}")
    return path


def predict(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    head = Head(model.config.get("head", Head.SIGMOID.value))
    scores, _ = forward(model.parameters, X, bool(model.config.get("residual", False)), head)
    if head is Head.ONE_CLASS_SOFTMAX:
        return np.clip(scores, -1.0, 1.0)
    return scores
