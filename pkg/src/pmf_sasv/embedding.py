"""
Embedding - 160-dimensional time embeddings from channel PMFs and two class models.

Value (n, l) is d_l(input_n, class2_n) - d_l(input_n, class1_n), stored
channel-major at index (n - 1) * 8 + l. With class1 = genuine (or male),
positive values mean the utterance is closer to class1.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from .errors import DataError
from .pmf import BinCountMismatchError, ChannelCountMismatchError, Pmf, PmfGroupModel, smooth_for_divergence
from .similarity import MEASURE_COUNT, MeasureId, SimilarityConfig, measure_vector

logger = logging.getLogger(__name__)

FILTER_KINDS = 2


class TooFewEmbeddingsError(DataError):
    """PCA needs at least dims + 1 embeddings."""


class EmbeddingFileError(DataError):
    """Embedding binary and sidecar disagree or are malformed."""


@dataclass(frozen=True)
class Embedding:
    values: np.ndarray
    class_pair: Tuple[str, str]
    source_id: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).ravel()
        if values.size % MEASURE_COUNT or values.size == 0:
            raise DataError(f"Embedding size {values.size} is not a multiple of {MEASURE_COUNT}")
        if not np.all(np.isfinite(values)):
            raise DataError(f"Embedding for {self.source_id!r} contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "class_pair", tuple(self.class_pair))

    @property
    def channel_count(self) -> int:
        return self.values.size // MEASURE_COUNT

    def at(self, channel: int, measure_id: MeasureId) -> float:
        """Value for 1-based channel ``channel`` and measure ``measure_id``."""
        return float(self.values[(channel - 1) * MEASURE_COUNT + int(measure_id)])


@dataclass(frozen=True)
class GroupedEmbedding:
    """
    Embedding split into 2 * 8 groups: group g = 2 * l + k holds measure l over
    the Gammatone (k = 0) or inverse-Gammatone (k = 1) half of the channels.
    """
    groups: np.ndarray
    class_pair: Tuple[str, str] = ("", "")
    source_id: str = ""

    @property
    def group_count(self) -> int:
        return self.groups.shape[0]

    @property
    def group_width(self) -> int:
        return self.groups.shape[1]

    def group(self, measure_id: MeasureId, inverse: bool) -> np.ndarray:
        return self.groups[int(measure_id) * FILTER_KINDS + int(inverse)]


def group_matrix(values: np.ndarray) -> np.ndarray:
    """Reshape channel-major rows (..., N*8) into (..., 16, N/2)."""
    values = np.asarray(values, dtype=np.float64)
    channels = values.shape[-1] // MEASURE_COUNT
    half = channels // 2
    lead = values.shape[:-1]
    cube = values.reshape(*lead, FILTER_KINDS, half, MEASURE_COUNT)
    # (..., kind, channel, measure) -> (..., measure, kind, channel)
    cube = np.moveaxis(cube, -1, -3)
    return cube.reshape(*lead, MEASURE_COUNT * FILTER_KINDS, half)


def flatten_matrix(groups: np.ndarray) -> np.ndarray:
    """Inverse of :func:`group_matrix`."""
    groups = np.asarray(groups, dtype=np.float64)
    lead = groups.shape[:-2]
    half = groups.shape[-1]
    cube = groups.reshape(*lead, MEASURE_COUNT, FILTER_KINDS, half)
    cube = np.moveaxis(cube, -3, -1)
    return cube.reshape(*lead, FILTER_KINDS * half * MEASURE_COUNT)


def regroup(e: Embedding) -> GroupedEmbedding:
    if e.channel_count % 2:
        raise DataError(f"Cannot split {e.channel_count} channels into two filter kinds")
    return GroupedEmbedding(groups=group_matrix(e.values), class_pair=e.class_pair, source_id=e.source_id)


def flatten(g: GroupedEmbedding) -> Embedding:
    return Embedding(values=flatten_matrix(g.groups), class_pair=g.class_pair, source_id=g.source_id)


def _check_models(model1: PmfGroupModel, model2: PmfGroupModel):
    if model1.channel_count != model2.channel_count:
        raise ChannelCountMismatchError(
            f"Models {model1.group_name!r} and {model2.group_name!r} have "
            f"{model1.channel_count} and {model2.channel_count} channels"
        )
    if model1.bin_count != model2.bin_count:
        raise BinCountMismatchError(
            f"Models {model1.group_name!r} and {model2.group_name!r} have "
            f"{model1.bin_count} and {model2.bin_count} bins"
        )


class EmbeddingExtractor:
    """
    Embeds utterances against a fixed (class1, class2) model pair.

    Smoothed copies of the model PMFs are computed once and reused for the
    KL-family slots.
    """

    def __init__(
        self,
        model1: PmfGroupModel,
        model2: PmfGroupModel,
        similarity: Optional[SimilarityConfig] = None,
        epsilon: float = 1e-6,
    ):
        _check_models(model1, model2)
        self.model1 = model1
        self.model2 = model2
        self.similarity = similarity or SimilarityConfig()
        self.epsilon = epsilon
        self._smoothed1 = [smooth_for_divergence(p, epsilon) for p in model1.channel_pmfs]
        self._smoothed2 = [smooth_for_divergence(p, epsilon) for p in model2.channel_pmfs]

    @property
    def class_pair(self) -> Tuple[str, str]:
        return (self.model1.group_name, self.model2.group_name)

    @property
    def dimension(self) -> int:
        return self.model1.channel_count * MEASURE_COUNT

    def embed(self, input_pmfs: Sequence[Pmf], source_id: str = "") -> Embedding:
        if len(input_pmfs) != self.model1.channel_count:
            raise ChannelCountMismatchError(
                f"{source_id}: {len(input_pmfs)} input channels, models have {self.model1.channel_count}"
            )
        values = np.empty(self.dimension)
        for n, pmf in enumerate(input_pmfs):
            if pmf.bin_count != self.model1.bin_count:
                raise BinCountMismatchError(
                    f"{source_id}: channel {n + 1} has {pmf.bin_count} bins, models have {self.model1.bin_count}"
                )
            smooth_input = smooth_for_divergence(pmf, self.epsilon)
            d1 = measure_vector(pmf, self.model1.channel_pmfs[n], self.similarity,
                                smoothed=(smooth_input, self._smoothed1[n]))
            d2 = measure_vector(pmf, self.model2.channel_pmfs[n], self.similarity,
                                smoothed=(smooth_input, self._smoothed2[n]))
            values[n * MEASURE_COUNT:(n + 1) * MEASURE_COUNT] = d2 - d1
        return Embedding(values=values, class_pair=self.class_pair, source_id=source_id)


def embed(
    input_pmfs: Sequence[Pmf],
    model1: PmfGroupModel,
    model2: PmfGroupModel,
    similarity: Optional[SimilarityConfig] = None,
    epsilon: float = 1e-6,
    source_id: str = "",
) -> Embedding:
    """One-shot embedding; use :class:`EmbeddingExtractor` for many utterances."""
    return EmbeddingExtractor(model1, model2, similarity, epsilon).embed(input_pmfs, source_id)


# PCA projection

@dataclass
class PcaProjection:
    projections: np.ndarray
    basis: np.ndarray
    mean: np.ndarray
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    degenerate: bool = False


def pca_project(embeddings: Sequence[Embedding] | np.ndarray, dims: int = 3, rank_tolerance: float = 1e-9) -> PcaProjection:
    """
    Project embeddings on their top ``dims`` principal components.

    The basis columns are sign-fixed so that each column's largest-magnitude
    component is positive. When the covariance has rank below ``dims`` the
    available components are still returned and ``degenerate`` is set.
    """
    if dims not in (2, 3):
        raise DataError(f"PCA dims must be 2 or 3, got {dims}")
    if isinstance(embeddings, np.ndarray):
        X = np.asarray(embeddings, dtype=np.float64)
    else:
        X = np.vstack([e.values for e in embeddings]) if len(embeddings) else np.empty((0, 0))
    if X.shape[0] < dims + 1:
        raise TooFewEmbeddingsError(f"PCA to {dims} dims needs at least {dims + 1} embeddings, got {X.shape[0]}")

    mean = X.mean(axis=0)
    centered = X - mean
    cov = np.cov(centered, rowvar=False)
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    eigenvectors = eigenvectors[:, order]

    basis = eigenvectors[:, :dims].copy()
    for j in range(dims):
        if basis[np.argmax(np.abs(basis[:, j])), j] < 0:
            basis[:, j] = -basis[:, j]

    total = eigenvalues.sum()
    ratio = eigenvalues[:dims] / total if total > 0 else np.zeros(dims)
    scale = eigenvalues[0] if eigenvalues[0] > 0 else 1.0
    rank = int(np.sum(eigenvalues > rank_tolerance * scale)) if total > 0 else 0
    degenerate = rank < dims
    if degenerate:
        logger.warning(f"PCA covariance has rank {rank} < {dims}; trailing components are arbitrary")

    return PcaProjection(
        projections=centered @ basis,
        basis=basis,
        mean=mean,
        eigenvalues=eigenvalues,
        explained_variance_ratio=ratio,
        degenerate=degenerate,
    )


def export_pca_csv(path, projection: PcaProjection, source_ids: Sequence[str], labels: Sequence[str]) -> Path:
    """Write ``source_id,label,pc1..pcK`` rows."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dims = projection.projections.shape[1]
    lines = ["source_id,label," + ",".join(f"pc{j + 1}" for j in range(dims))]
    for sid, label, row in zip(source_ids, labels, projection.projections):
        lines.append(f"{sid},{label}," + ",".join(f"{v:.10g}" for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Wrote {len(lines) - 1} PCA rows to {path}")
    return path


# Storage

class EmbeddingMeta(BaseModel):
    """One sidecar line per stored embedding."""
    source_id: str
    class_pair: Tuple[str, str]
    gender: str = "unknown"
    trial_class: Optional[str] = None
    attack_id: str = "-"
    subset: str = "-"


@dataclass
class EmbeddingTable:
    """Embeddings loaded from disk, rows aligned with their metadata."""
    matrix: np.ndarray
    meta: List[EmbeddingMeta] = field(default_factory=list)

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def embeddings(self) -> List[Embedding]:
        return [Embedding(values=row, class_pair=m.class_pair, source_id=m.source_id)
                for row, m in zip(self.matrix, self.meta)]

    def select(self, mask) -> "EmbeddingTable":
        mask = np.asarray(mask, dtype=bool)
        return EmbeddingTable(matrix=self.matrix[mask], meta=[m for m, keep in zip(self.meta, mask) if keep])


def embedding_paths(prefix) -> Tuple[Path, Path]:
    """``<prefix>.f64`` and ``<prefix>.jsonl``; dots already in the prefix are kept."""
    prefix = Path(prefix)
    return prefix.with_name(prefix.name + ".f64"), prefix.with_name(prefix.name + ".jsonl")


def save_embeddings(prefix, embeddings: Iterable[Embedding], metas: Iterable[EmbeddingMeta]) -> Tuple[Path, Path]:
    """Write ``<prefix>.f64`` (LE float64 rows) and ``<prefix>.jsonl`` (one meta per row)."""
    data_path, meta_path = embedding_paths(prefix)
    data_path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(data_path, "wb") as fd, open(meta_path, "w", encoding="utf-8") as fm:
        for emb, meta in zip(embeddings, metas, strict=True):
            fd.write(emb.values.astype("<f8").tobytes())
            fm.write(meta.model_dump_json() + "\n")
            count += 1
    logger.info(f"Saved {count} embeddings to {data_path}")
    return data_path, meta_path


def load_embeddings(prefix) -> EmbeddingTable:
    data_path, meta_path = embedding_paths(prefix)
    metas = []
    with open(meta_path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if line.strip():
                try:
                    metas.append(EmbeddingMeta(**json.loads(line)))
                except (json.JSONDecodeError, ValueError) as e:
                    raise EmbeddingFileError(f"{meta_path}:{line_no}: {e}") from e

    raw = np.fromfile(data_path, dtype="<f8")
    if not metas:
        return EmbeddingTable(matrix=raw.reshape(0, 0), meta=[])
    if raw.size % len(metas):
        raise EmbeddingFileError(f"{data_path}: {raw.size} values do not split into {len(metas)} rows")
    return EmbeddingTable(matrix=raw.reshape(len(metas), -1).astype(np.float64), meta=metas)
