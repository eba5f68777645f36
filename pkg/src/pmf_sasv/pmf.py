"""
PMF - Amplitude probability mass functions of filtered speech.

A Pmf is a normalized histogram with 2^b equal bins over [-1, 1]. Group models
pool the samples of every file in a group, channel by channel.
"""

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator

from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)

DEFAULT_BIN_COUNT = 2 ** 16
DEFAULT_EPSILON = 1e-6
SUM_TOLERANCE = 1e-9

MODEL_MAGIC = b"PMFM"
MODEL_VERSION = 1


class EmptyInputError(DataError):
    """No samples to histogram."""


class OutOfRangeSampleError(DataError):
    """A sample lies outside [-1, 1]; callers must clip first."""


class EmptyGroupError(DataError):
    """A group has no files."""


class ChannelCountMismatchError(DataError):
    """Per-file channel PMF lists disagree in length."""


class BinCountMismatchError(DataError):
    """Two PMFs have different bin counts."""


class BadEpsilonError(ConfigError):
    """Smoothing epsilon outside (0, 1e-3]."""


class PmfFormatError(DataError):
    """A PMF model file is malformed."""


class PmfConfig(BaseModel):
    """``[pmf]`` config section."""
    bin_count: int = Field(DEFAULT_BIN_COUNT, ge=2)
    epsilon: float = Field(DEFAULT_EPSILON, gt=0, le=1e-3)

    @field_validator("bin_count")
    @classmethod
    def _power_of_two(cls, v: int) -> int:
        if v & (v - 1):
            raise ValueError(f"bin_count must be a power of two, got {v}")
        return v


@dataclass(frozen=True)
class Pmf:
    """Normalized amplitude histogram over [-1, 1]."""
    bins: np.ndarray
    sample_count: int = 0

    def __post_init__(self):
        bins = np.array(self.bins, dtype=np.float64)
        size = bins.size
        if bins.ndim != 1 or size < 1 or size & (size - 1):
            raise DataError(f"PMF bin count must be a power of two, got {size}")
        if np.any(bins < 0) or not np.all(np.isfinite(bins)):
            raise DataError("PMF bins must be finite and non-negative")
        total = bins.sum()
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise DataError(f"PMF bins sum to {total!r}, expected 1")
        bins.setflags(write=False)
        object.__setattr__(self, "bins", bins)

    @property
    def bin_count(self) -> int:
        return self.bins.size

    @property
    def bin_width(self) -> float:
        return 2.0 / self.bin_count

    def bin_edges(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.bin_count + 1)


def bin_indices(samples: np.ndarray, bin_count: int) -> np.ndarray:
    """Map samples in [-1, 1] to bins [-1 + i*dx, -1 + (i+1)*dx); 1.0 falls in the last bin."""
    idx = np.floor((samples + 1.0) * (bin_count / 2.0)).astype(np.int64)
    return np.minimum(idx, bin_count - 1)


def compute_pmf(samples, bin_count: int = DEFAULT_BIN_COUNT) -> Pmf:
    """
    Histogram clipped samples into ``bin_count`` equal bins over [-1, 1].

    Raises:
        EmptyInputError: No samples
        OutOfRangeSampleError: Any sample outside [-1, 1] (or non-finite)
    """
    values = np.asarray(samples, dtype=np.float64).ravel()
    if values.size == 0:
        raise EmptyInputError("Cannot compute a PMF of zero samples")
    if not np.all((values >= -1.0) & (values <= 1.0)):
        raise OutOfRangeSampleError("Samples must lie in [-1, 1]; clip before computing the PMF")

    counts = np.bincount(bin_indices(values, bin_count), minlength=bin_count)
    return Pmf(bins=counts / values.size, sample_count=int(values.size))


def pmf_counts(pmf: Pmf) -> np.ndarray:
    """Recover integer bin counts from a PMF built over ``sample_count`` samples."""
    if pmf.sample_count <= 0:
        raise DataError("PMF carries no sample count; cannot pool it")
    return np.rint(pmf.bins * pmf.sample_count).astype(np.int64)


class GroupAccumulator:
    """
    Streaming pooled-sample aggregation of per-channel PMFs.

    Integer counts are accumulated so the result does not depend on the
    order or partitioning of the inputs.
    """

    def __init__(self, group_name: str, channel_count: int, bin_count: int):
        self.group_name = group_name
        self.channel_count = channel_count
        self.bin_count = bin_count
        self.counts = np.zeros((channel_count, bin_count), dtype=np.int64)
        self.sample_counts = np.zeros(channel_count, dtype=np.int64)
        self.file_count = 0

    def add(self, channel_pmfs: Sequence[Pmf]):
        if len(channel_pmfs) != self.channel_count:
            raise ChannelCountMismatchError(
                f"Group {self.group_name!r}: got {len(channel_pmfs)} channels, expected {self.channel_count}"
            )
        for n, pmf in enumerate(channel_pmfs):
            if pmf.bin_count != self.bin_count:
                raise BinCountMismatchError(
                    f"Group {self.group_name!r}: channel {n + 1} has {pmf.bin_count} bins, expected {self.bin_count}"
                )
            self.counts[n] += pmf_counts(pmf)
            self.sample_counts[n] += pmf.sample_count
        self.file_count += 1

    def merge(self, other: "GroupAccumulator"):
        if (other.channel_count, other.bin_count) != (self.channel_count, self.bin_count):
            raise ChannelCountMismatchError("Cannot merge accumulators of different shapes")
        self.counts += other.counts
        self.sample_counts += other.sample_counts
        self.file_count += other.file_count

    def finish(self) -> "PmfGroupModel":
        if self.file_count == 0:
            raise EmptyGroupError(f"Group {self.group_name!r} has no files")
        channels = tuple(
            Pmf(bins=self.counts[n] / self.sample_counts[n], sample_count=int(self.sample_counts[n]))
            for n in range(self.channel_count)
        )
        return PmfGroupModel(group_name=self.group_name, channel_pmfs=channels, file_count=self.file_count)


@dataclass(frozen=True)
class PmfGroupModel:
    """Per-channel PMF model of one group of files."""
    group_name: str
    channel_pmfs: Tuple[Pmf, ...]
    file_count: int

    def __post_init__(self):
        object.__setattr__(self, "channel_pmfs", tuple(self.channel_pmfs))
        if not self.channel_pmfs:
            raise ChannelCountMismatchError(f"Model {self.group_name!r} has no channels")
        sizes = {p.bin_count for p in self.channel_pmfs}
        if len(sizes) != 1:
            raise BinCountMismatchError(f"Model {self.group_name!r} mixes bin counts {sorted(sizes)}")

    @property
    def channel_count(self) -> int:
        return len(self.channel_pmfs)

    @property
    def bin_count(self) -> int:
        return self.channel_pmfs[0].bin_count

    def matrix(self) -> np.ndarray:
        return np.vstack([p.bins for p in self.channel_pmfs])


def aggregate_group(pmf_per_file_per_channel: Iterable[Sequence[Pmf]], group_name: str = "group") -> PmfGroupModel:
    """
    Build a group model as the pooled-sample PMF of every file, per channel.

    Args:
        pmf_per_file_per_channel: One list of channel PMFs per file
        group_name: Name stored in the model

    Raises:
        EmptyGroupError: No files
        ChannelCountMismatchError: Files disagree on channel count
    """
    accumulator = None
    for channel_pmfs in pmf_per_file_per_channel:
        if accumulator is None:
            if not channel_pmfs:
                raise ChannelCountMismatchError(f"Group {group_name!r}: file with no channels")
            accumulator = GroupAccumulator(group_name, len(channel_pmfs), channel_pmfs[0].bin_count)
        accumulator.add(channel_pmfs)

    if accumulator is None:
        raise EmptyGroupError(f"Group {group_name!r} has no files")
    return accumulator.finish()


def smooth_for_divergence(p: Pmf, epsilon: float = DEFAULT_EPSILON) -> Pmf:
    """Mix ``p`` with the uniform PMF: (1 - eps) * p + eps / K."""
    if not 0.0 < epsilon <= 1e-3:
        raise BadEpsilonError(f"Smoothing epsilon must lie in (0, 1e-3], got {epsilon}")
    smoothed = (1.0 - epsilon) * p.bins + epsilon / p.bin_count
    return Pmf(bins=smoothed, sample_count=p.sample_count)


# Model persistence

_HEADER = struct.Struct("<4sH")


def save_model(model: PmfGroupModel, path) -> Path:
    """Write a binary PMF model: magic, version, name, channel/bin/file counts, LE float64 bins."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    name = model.group_name.encode("utf-8")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MODEL_MAGIC, MODEL_VERSION))
        f.write(struct.pack("<H", len(name)))
        f.write(name)
        f.write(struct.pack("<HII", model.channel_count, model.bin_count, model.file_count))
        f.write(struct.pack(f"<{model.channel_count}Q", *(p.sample_count for p in model.channel_pmfs)))
        f.write(model.matrix().astype("<f8").tobytes())
    logger.info(f"Saved PMF model {model.group_name!r} ({model.file_count} files) to {path}")
    return path


def load_model(path) -> PmfGroupModel:
    """Read a model written by :func:`save_model`."""
    path = Path(path)
    data = path.read_bytes()
    try:
        magic, version = _HEADER.unpack_from(data, 0)
        if magic != MODEL_MAGIC:
            raise PmfFormatError(f"{path}: bad magic {magic!r}")
        if version != MODEL_VERSION:
            raise PmfFormatError(f"{path}: unsupported model version {version}")
        offset = _HEADER.size
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        channels, bins, files = struct.unpack_from("<HII", data, offset)
        offset += struct.calcsize("<HII")
        sample_counts = struct.unpack_from(f"<{channels}Q", data, offset)
        offset += 8 * channels
    except struct.error as e:
        raise PmfFormatError(f"{path}: truncated header ({e})") from e

    expected = channels * bins * 8
    if len(data) - offset != expected:
        raise PmfFormatError(f"{path}: expected {expected} bytes of bins, found {len(data) - offset}")
    matrix = np.frombuffer(data, dtype="<f8", offset=offset).reshape(channels, bins)
    pmfs = tuple(Pmf(bins=matrix[n], sample_count=int(sample_counts[n])) for n in range(channels))
    return PmfGroupModel(group_name=name, channel_pmfs=pmfs, file_count=files)


def export_model_csv(model: PmfGroupModel, path, skip_empty: bool = True) -> Path:
    """CSV view of a model: channel, bin, left edge, mass."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines: List[str] = ["channel,bin,left_edge,mass"]
    for n, pmf in enumerate(model.channel_pmfs, start=1):
        edges = pmf.bin_edges()
        for i in np.flatnonzero(pmf.bins) if skip_empty else range(pmf.bin_count):
            lines.append(f"{n},{i},{edges[i]:.10g},{pmf.bins[i]:.17g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
