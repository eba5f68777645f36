"""
Models - Trained classifier container, scoring and the model file format.

File layout (little-endian):

    "SASV" | u8 kind | u16 version | 32-byte config hash | u32 header length
    | JSON header | raw parameter arrays in header order
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from cryptography.hazmat.primitives import hashes
from pydantic import BaseModel, ValidationError

from ..embedding import Embedding, GroupedEmbedding, flatten_matrix, group_matrix
from ..errors import ConfigError, DataError
from .dataset import FeatureLayout, LayoutMismatchError

logger = logging.getLogger(__name__)

MODEL_MAGIC = b"SASV"
MODEL_VERSION = 1
_PREFIX = struct.Struct("<4sBH32sI")


class ModelFormatError(DataError):
    """Model file is malformed."""


class ModelKind(str, Enum):
    LOGISTIC_REGRESSION = "logistic_regression"
    GBDT = "gbdt"
    GROUPED_MLP = "grouped_mlp"

    @property
    def tag(self) -> int:
        return list(ModelKind).index(self) + 1

    @classmethod
    def from_tag(cls, tag: int) -> "ModelKind":
        kinds = list(cls)
        if not 1 <= tag <= len(kinds):
            raise ModelFormatError(f"Unknown model kind tag {tag}")
        return kinds[tag - 1]


class ScoreRange(str, Enum):
    UNIT = "unit"
    SYMMETRIC = "symmetric"


def sha256(data: bytes) -> bytes:
    digest = hashes.Hash(hashes.SHA256())
    digest.update(data)
    return digest.finalize()


def config_digest(config: Dict[str, Any]) -> bytes:
    """SHA-256 of the canonical JSON form of a training configuration."""
    return sha256(json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8"))


@dataclass
class TrainedModel:
    kind: ModelKind
    parameters: Dict[str, np.ndarray]
    layout: FeatureLayout
    feature_shape: Tuple[int, ...]
    config: Dict[str, Any] = field(default_factory=dict)
    training_config_hash: bytes = b""

    def __post_init__(self):
        self.feature_shape = tuple(int(d) for d in self.feature_shape)
        if not self.training_config_hash:
            self.training_config_hash = config_digest(self.config)

    @property
    def score_range(self) -> ScoreRange:
        if self.kind is ModelKind.GROUPED_MLP and self.config.get("head") == "one_class_softmax":
            return ScoreRange.SYMMETRIC
        return ScoreRange.UNIT

    def _as_batch(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.shape[1:] == self.feature_shape:
            return X
        size = int(np.prod(self.feature_shape))
        if self.layout is FeatureLayout.GROUPED and X.ndim == 2 and X.shape[1] == size:
            return group_matrix(X)
        if self.layout is FeatureLayout.FLAT and X.ndim == 3 and X.shape[1] * X.shape[2] == size:
            return flatten_matrix(X)
        raise LayoutMismatchError(f"Features of shape {X.shape} do not fit model input {self.feature_shape}")

    def score_batch(self, features) -> np.ndarray:
        """Scores for a batch of rows; higher means class 1 (bona fide / male)."""
        X = self._as_batch(features)
        if self.kind is ModelKind.LOGISTIC_REGRESSION:
            from .logreg import predict
        elif self.kind is ModelKind.GBDT:
            from .gbdt import predict
        else:
            from .grouped_mlp import predict
        return predict(self, X)

    def score(self, row) -> float:
        """Score one Embedding, GroupedEmbedding or raw feature row."""
        if isinstance(row, Embedding):
            values = row.values
            if self.layout is FeatureLayout.GROUPED:
                values = group_matrix(values[None, :])[0]
        elif isinstance(row, GroupedEmbedding):
            values = row.groups
            if self.layout is FeatureLayout.FLAT:
                values = flatten_matrix(values[None, ...])[0]
        else:
            values = np.asarray(row, dtype=np.float64)
        if values.shape != self.feature_shape:
            raise LayoutMismatchError(f"Row of shape {values.shape} does not match model input {self.feature_shape}")
        return float(self.score_batch(values[None, ...])[0])

    # Serialization

    def to_bytes(self) -> bytes:
        names = sorted(self.parameters)
        arrays = []
        entries = []
        for name in names:
            arr = np.asarray(self.parameters[name])
            dtype = "<i8" if np.issubdtype(arr.dtype, np.integer) else "<f8"
            arrays.append(np.ascontiguousarray(arr, dtype=dtype).tobytes())
            entries.append({"name": name, "dtype": dtype, "shape": list(arr.shape)})
        header = json.dumps({
            "kind": self.kind.value,
            "layout": self.layout.value,
            "feature_shape": list(self.feature_shape),
            "config": self.config,
            "arrays": entries,
        }, sort_keys=True, separators=(",", ":")).encode("utf-8")
        prefix = _PREFIX.pack(MODEL_MAGIC, self.kind.tag, MODEL_VERSION, self.training_config_hash, len(header))
        return prefix + header + b"".join(arrays)

    def digest(self) -> str:
        """Hex SHA-256 of the serialized model."""
        return sha256(self.to_bytes()).hex()

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_bytes())
        logger.info(f"Saved {self.kind.value} model to {path} (digest {self.digest()[:12]})")
        return path

    @classmethod
    def from_bytes(cls, data: bytes, source: str = "<bytes>") -> "TrainedModel":
        if len(data) < _PREFIX.size:
            raise ModelFormatError(f"{source}: file too short")
        magic, tag, version, config_hash, header_len = _PREFIX.unpack_from(data, 0)
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"{source}: bad magic {magic!r}")
        if version != MODEL_VERSION:
            raise ModelFormatError(f"{source}: unsupported model version {version}")
        offset = _PREFIX.size
        try:
            header = json.loads(data[offset:offset + header_len].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ModelFormatError(f"{source}: bad header ({e})") from e
        offset += header_len

        kind = ModelKind.from_tag(tag)
        if header["kind"] != kind.value:
            raise ModelFormatError(f"{source}: kind tag {kind.value} disagrees with header {header['kind']}")

        parameters = {}
        for entry in header["arrays"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            end = offset + 8 * count
            if end > len(data):
                raise ModelFormatError(f"{source}: parameter {entry['name']} truncated")
            parameters[entry["name"]] = np.frombuffer(data[offset:end], dtype=entry["dtype"]).reshape(shape).copy()
            offset = end
        if offset != len(data):
            raise ModelFormatError(f"{source}: {len(data) - offset} trailing bytes")

        return cls(
            kind=kind,
            parameters=parameters,
            layout=FeatureLayout(header["layout"]),
            feature_shape=tuple(header["feature_shape"]),
            config=header["config"],
            training_config_hash=config_hash,
        )

    @classmethod
    def load(cls, path) -> "TrainedModel":
        path = Path(path)
        return cls.from_bytes(path.read_bytes(), str(path))


def score(model: TrainedModel, row) -> float:
    return model.score(row)


def _merged(config_cls, base: Optional[BaseModel], hyperparams: Dict[str, Any]):
    values = base.model_dump(exclude={"seed"}) if base is not None else {}
    try:
        return config_cls(**{**values, **hyperparams})
    except ValidationError as e:
        raise ConfigError(f"Invalid {config_cls.__name__} values {hyperparams}: {e}") from e


def train_flat_classifier(kind: ModelKind, data, hyperparams: Dict[str, Any], seed: int,
                          base: Optional[BaseModel] = None) -> TrainedModel:
    """
    Train a logistic-regression or GBDT model from a hyperparameter dict.

    Args:
        hyperparams: Grid entry; its keys override ``base``
        base: The ``[logreg]`` or ``[gbdt]`` section supplying every other value

    Raises:
        ConfigError: ``kind`` is not a flat classifier or the merged values are invalid
    """
    kind = ModelKind(kind)
    if kind is ModelKind.LOGISTIC_REGRESSION:
        from .logreg import LogRegConfig, train_logreg
        config = _merged(LogRegConfig, base, hyperparams)
        return train_logreg(data, l2=config.l2, epochs=config.epochs, lr=config.lr, seed=seed)
    if kind is ModelKind.GBDT:
        from .gbdt import GbdtConfig, train_gbdt
        config = _merged(GbdtConfig, base, hyperparams)
        return train_gbdt(data, n_trees=config.n_trees, max_depth=config.max_depth, lr=config.lr,
                          seed=seed, config=config)
    raise ConfigError(f"{kind.value} is not a flat-feature classifier")
