"""
Audio I/O - Read 16-bit mono PCM WAV files into normalized sample buffers.

Samples are scaled by 1/32768 so that -32768 maps exactly to -1.0 and the
buffer lives on the [-1, 1] support used by the amplitude histograms.
"""

import logging
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

PCM_SCALE = 32768.0
BITS_PER_SAMPLE = 16
WAVE_FORMAT_PCM = 0x0001

_CHUNK_HEADER = struct.Struct("<4sI")
_FMT_BODY = struct.Struct("<HHIIHH")


class MalformedWavError(DataError):
    """The file is not a well-formed RIFF/WAVE stream."""

    def __init__(self, path, offset: int, reason: str):
        self.path = Path(path)
        self.offset = offset
        super().__init__(f"{path}: malformed WAV at byte {offset}: {reason}")


class UnsupportedFormatError(DataError):
    """WAV file is valid but not 16-bit mono integer PCM."""

    def __init__(self, path, offset: int, reason: str):
        self.path = Path(path)
        self.offset = offset
        super().__init__(f"{path}: unsupported WAV format at byte {offset}: {reason}")


class EmptyAudioError(DataError):
    """WAV file holds no samples."""


class NonFiniteSampleError(DataError):
    """A sample sequence contains NaN or infinite values."""


@dataclass(frozen=True)
class AudioBuffer:
    """Normalized mono waveform."""
    samples: np.ndarray
    sample_rate_hz: int
    source_id: str

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise EmptyAudioError(f"{self.source_id}: audio buffer must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise NonFiniteSampleError(f"{self.source_id}: audio buffer contains non-finite samples")
        if np.any(np.abs(samples) > 1.0):
            raise DataError(f"{self.source_id}: samples must lie in [-1, 1]")
        if self.sample_rate_hz <= 0:
            raise DataError(f"{self.source_id}: sample rate must be positive, got {self.sample_rate_hz}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def __len__(self) -> int:
        return self.samples.size


def read_wav(path) -> AudioBuffer:
    """
    Read a canonical 16-bit mono PCM WAV file.

    Chunks are walked in order; unknown chunks (LIST, fact, ...) are skipped.

    Raises:
        MalformedWavError: Bad RIFF header or chunk layout
        UnsupportedFormatError: Bit depth other than 16 or more than one channel
        EmptyAudioError: The data chunk holds no samples
    """
    path = Path(path)
    data = path.read_bytes()

    if len(data) < 12:
        raise MalformedWavError(path, 0, "file shorter than the RIFF header")
    riff, _riff_size, wave_id = struct.unpack_from("<4sI4s", data, 0)
    if riff != b"RIFF":
        raise MalformedWavError(path, 0, f"expected 'RIFF', found {riff!r}")
    if wave_id != b"WAVE":
        raise MalformedWavError(path, 8, f"expected 'WAVE', found {wave_id!r}")

    sample_rate = None
    payload = None
    offset = 12
    while offset + _CHUNK_HEADER.size <= len(data):
        chunk_id, chunk_size = _CHUNK_HEADER.unpack_from(data, offset)
        body = offset + _CHUNK_HEADER.size
        if body + chunk_size > len(data):
            raise MalformedWavError(path, offset, f"chunk {chunk_id!r} overruns end of file")

        if chunk_id == b"fmt ":
            if chunk_size < _FMT_BODY.size:
                raise MalformedWavError(path, offset, f"fmt chunk too short ({chunk_size} bytes)")
            fmt_tag, channels, rate, _byte_rate, block_align, bits = _FMT_BODY.unpack_from(data, body)
            if fmt_tag != WAVE_FORMAT_PCM:
                raise UnsupportedFormatError(path, body, f"format tag {fmt_tag:#06x} is not integer PCM")
            if bits != BITS_PER_SAMPLE:
                raise UnsupportedFormatError(path, body + 14, f"{bits}-bit samples, expected 16-bit")
            if channels != 1:
                raise UnsupportedFormatError(path, body + 2, f"{channels} channels, expected mono")
            if block_align != 2:
                raise MalformedWavError(path, body + 12, f"block align {block_align} inconsistent with 16-bit mono")
            if rate <= 0:
                raise MalformedWavError(path, body + 4, "sample rate must be positive")
            sample_rate = rate
        elif chunk_id == b"data":
            if sample_rate is None:
                raise MalformedWavError(path, offset, "data chunk precedes fmt chunk")
            if chunk_size % 2:
                raise MalformedWavError(path, offset, "odd data size for 16-bit samples")
            payload = data[body:body + chunk_size]
            break

        # Chunks are word aligned
        offset = body + chunk_size + (chunk_size & 1)

    if sample_rate is None:
        raise MalformedWavError(path, offset, "no fmt chunk found")
    if payload is None:
        raise MalformedWavError(path, offset, "no data chunk found")
    if not payload:
        raise EmptyAudioError(f"{path}: WAV file contains zero samples")

    samples = np.frombuffer(payload, dtype="<i2").astype(np.float64) / PCM_SCALE
    logger.debug(f"Read {path.name}: {samples.size} samples at {sample_rate} Hz")
    return AudioBuffer(samples=samples, sample_rate_hz=sample_rate, source_id=path.stem)


def to_pcm16(samples) -> np.ndarray:
    """Quantize [-1, 1] samples to int16 (round to nearest, saturating at 32767)."""
    values = np.asarray(samples, dtype=np.float64)
    return np.clip(np.rint(values * PCM_SCALE), -32768, 32767).astype("<i2")


def write_wav(path, samples, sample_rate_hz: int) -> Path:
    """Write samples in [-1, 1] (or int16 PCM) as a 16-bit mono WAV file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    samples = np.asarray(samples)
    pcm = samples.astype("<i2") if samples.dtype == np.int16 else to_pcm16(samples)

    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate_hz))
        wf.writeframes(pcm.tobytes())
    return path


def clip_to_unit(samples) -> np.ndarray:
    """Clip a filtered sequence to [-1, 1] element-wise, preserving order and length."""
    values = np.asarray(samples, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise NonFiniteSampleError("cannot clip a sequence containing NaN or infinite values")
    return np.clip(values, -1.0, 1.0)
