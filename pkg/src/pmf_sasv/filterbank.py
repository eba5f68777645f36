"""
Filter Bank - Gammatone and inverse-Gammatone channels feeding the amplitude PMFs.

Channels 1..n_pairs are 4th-order Gammatone band-pass filters realized as a
cascade of four second-order sections. Channels n_pairs+1..2*n_pairs are their
spectral complements: minimum-phase FIR filters whose power response is
1 - |H_gammatone|^2.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import signal

from .audio_io import AudioBuffer
from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)

EAR_Q = 9.26449
MIN_BW = 24.7
# Floor of the complementary power response; keeps the log-spectrum finite
NOTCH_FLOOR = 1e-3
# Length of the linear-phase prototype the minimum-phase inverse is cut from
PROTOTYPE_TAPS = 16385
RESPONSE_POINTS = 8193


class InvalidFrequencyRangeError(ConfigError):
    """Center-frequency range or sample rate cannot host the bank."""


class SampleRateMismatchError(DataError):
    """Audio sample rate differs from the rate the bank was designed for."""


class BadChannelIndexError(DataError):
    """Channel index outside 1..N."""


class FilterKind(str, Enum):
    GAMMATONE = "gammatone"
    INVERSE_GAMMATONE = "inverse_gammatone"


class FilterBankConfig(BaseModel):
    """Filter-bank parameters (``[filterbank]`` config section)."""
    min_cf_hz: float = Field(100.0, gt=0)
    max_cf_hz: float = Field(7000.0, gt=0)
    n_pairs: int = Field(10, ge=1)
    order: int = 4
    bandwidth_factor: float = Field(1.019, gt=0)
    inverse_taps: int = Field(512, ge=16)

    @model_validator(mode="after")
    def _check(self):
        if self.order != 4:
            raise ValueError("only 4th-order Gammatone filters are supported")
        if self.min_cf_hz >= self.max_cf_hz:
            raise ValueError(f"min_cf_hz ({self.min_cf_hz}) must be below max_cf_hz ({self.max_cf_hz})")
        return self


@dataclass(frozen=True)
class FilterSpec:
    """One filter channel. ``coefficients`` is an SOS matrix or FIR taps depending on kind."""
    index: int
    kind: FilterKind
    center_freq_hz: float
    bandwidth_hz: float
    order: int
    coefficients: np.ndarray

    def apply(self, samples: np.ndarray) -> np.ndarray:
        if self.kind is FilterKind.GAMMATONE:
            return signal.sosfilt(np.array(self.coefficients), samples)
        return signal.lfilter(self.coefficients, [1.0], samples)


@dataclass(frozen=True)
class FilterBank:
    channels: Tuple[FilterSpec, ...]
    sample_rate_hz: int

    def __len__(self) -> int:
        return len(self.channels)

    @property
    def n_pairs(self) -> int:
        return len(self.channels) // 2

    def channel(self, channel_index: int) -> FilterSpec:
        """Return channel by its 1-based index."""
        if not 1 <= channel_index <= len(self.channels):
            raise BadChannelIndexError(
                f"Channel index {channel_index} outside 1..{len(self.channels)}"
            )
        return self.channels[channel_index - 1]

    def center_frequencies(self) -> np.ndarray:
        return np.array([c.center_freq_hz for c in self.channels[:self.n_pairs]])


def erb_rate(freq_hz):
    """ERB-rate (Cam) scale."""
    return 21.4 * np.log10(1.0 + 0.00437 * np.asarray(freq_hz, dtype=np.float64))


def inverse_erb_rate(erb):
    return (10.0 ** (np.asarray(erb, dtype=np.float64) / 21.4) - 1.0) / 0.00437


def erb_bandwidth(freq_hz):
    """Equivalent rectangular bandwidth (Glasberg and Moore)."""
    return np.asarray(freq_hz, dtype=np.float64) / EAR_Q + MIN_BW


def erb_space(min_cf_hz: float, max_cf_hz: float, count: int) -> np.ndarray:
    """Center frequencies equally spaced on the ERB-rate scale, both ends included, ascending."""
    if count == 1:
        return np.array([float(min_cf_hz)])
    return inverse_erb_rate(np.linspace(erb_rate(min_cf_hz), erb_rate(max_cf_hz), count))


def gammatone_sos(center_freq_hz: float, bandwidth_hz: float, sample_rate_hz: int) -> np.ndarray:
    """
    All-pole digital Gammatone as four second-order sections, peak gain 1.

    Section numerators carry the four zero pairs of the impulse-invariant
    design; the four sections share one pole pair.
    """
    T = 1.0 / sample_rate_hz
    B = 2.0 * np.pi * bandwidth_hz
    arg = 2.0 * np.pi * center_freq_hz * T
    decay = np.exp(-B * T)

    b1 = -2.0 * np.cos(arg) * decay
    b2 = np.exp(-2.0 * B * T)

    sos = np.empty((4, 6))
    for row, root in enumerate((np.sqrt(3 + 2 ** 1.5), -np.sqrt(3 + 2 ** 1.5),
                                np.sqrt(3 - 2 ** 1.5), -np.sqrt(3 - 2 ** 1.5))):
        a1 = -(2.0 * T * np.cos(arg) * decay + 2.0 * root * T * np.sin(arg) * decay) / 2.0
        sos[row] = [T, a1, 0.0, 1.0, b1, b2]

    _, response = signal.sosfreqz(sos, worN=RESPONSE_POINTS, fs=sample_rate_hz)
    peak = np.max(np.abs(response))
    sos[:, :3] /= peak ** 0.25
    return sos


def complement_fir(sos: np.ndarray, sample_rate_hz: int, taps: int) -> np.ndarray:
    """
    Minimum-phase FIR whose power response approximates 1 - |H(f)|^2 of ``sos``.

    A long linear-phase prototype with magnitude 1 - |H|^2 is designed by
    frequency sampling; its homomorphic minimum-phase version has magnitude
    sqrt(1 - |H|^2), which is then truncated to ``taps`` coefficients.
    """
    nyquist = sample_rate_hz / 2.0
    grid = np.linspace(0.0, nyquist, RESPONSE_POINTS)
    _, response = signal.sosfreqz(sos, worN=grid, fs=sample_rate_hz)
    notch = np.clip(1.0 - np.abs(response) ** 2, NOTCH_FLOOR, 1.0)

    prototype = signal.firwin2(PROTOTYPE_TAPS, grid, notch, window="hamming", fs=sample_rate_hz)
    minimum = signal.minimum_phase(prototype, method="homomorphic", n_fft=2 ** 17)
    return np.ascontiguousarray(minimum[:taps])


def design_bank(sample_rate_hz: int, config: FilterBankConfig | None = None) -> FilterBank:
    """
    Design the 2 * n_pairs channel bank.

    Args:
        sample_rate_hz: Sampling rate the bank is designed for (>= 8000)
        config: Center-frequency range and filter parameters

    Returns:
        FilterBank with Gammatone channels first, inverse channels second,
        center frequencies ascending within each half

    Raises:
        InvalidFrequencyRangeError: Frequency range outside (0, Nyquist) or
            sample rate below 8 kHz
    """
    if config is None:
        config = FilterBankConfig()

    nyquist = sample_rate_hz / 2.0
    if sample_rate_hz < 8000:
        raise InvalidFrequencyRangeError(f"Sample rate {sample_rate_hz} Hz below 8000 Hz")
    if not 0.0 < config.min_cf_hz < config.max_cf_hz < nyquist:
        raise InvalidFrequencyRangeError(
            f"Need 0 < min_cf ({config.min_cf_hz}) < max_cf ({config.max_cf_hz}) < Nyquist ({nyquist})"
        )

    centers = erb_space(config.min_cf_hz, config.max_cf_hz, config.n_pairs)
    bandwidths = config.bandwidth_factor * erb_bandwidth(centers)

    gammatones = []
    inverses = []
    for k, (cf, bw) in enumerate(zip(centers, bandwidths)):
        sos = gammatone_sos(cf, bw, sample_rate_hz)
        gammatones.append(FilterSpec(
            index=k + 1,
            kind=FilterKind.GAMMATONE,
            center_freq_hz=float(cf),
            bandwidth_hz=float(bw),
            order=config.order,
            coefficients=sos,
        ))
        inverses.append(FilterSpec(
            index=config.n_pairs + k + 1,
            kind=FilterKind.INVERSE_GAMMATONE,
            center_freq_hz=float(cf),
            bandwidth_hz=float(bw),
            order=config.order,
            coefficients=complement_fir(sos, sample_rate_hz, config.inverse_taps),
        ))

    for spec in gammatones + inverses:
        spec.coefficients.setflags(write=False)

    logger.debug(
        f"Designed {2 * config.n_pairs}-channel bank at {sample_rate_hz} Hz, "
        f"cf {centers[0]:.1f}..{centers[-1]:.1f} Hz"
    )
    return FilterBank(channels=tuple(gammatones + inverses), sample_rate_hz=sample_rate_hz)


def apply_channel(bank: FilterBank, channel_index: int, audio: AudioBuffer) -> np.ndarray:
    """Filter ``audio`` through one channel (causal, single pass, unclipped)."""
    if audio.sample_rate_hz != bank.sample_rate_hz:
        raise SampleRateMismatchError(
            f"{audio.source_id}: audio at {audio.sample_rate_hz} Hz, bank designed for {bank.sample_rate_hz} Hz"
        )
    return bank.channel(channel_index).apply(audio.samples)


def channel_response(spec: FilterSpec, freqs_hz, sample_rate_hz: int) -> np.ndarray:
    """Complex frequency response of one channel at ``freqs_hz``."""
    freqs_hz = np.atleast_1d(np.asarray(freqs_hz, dtype=np.float64))
    if spec.kind is FilterKind.GAMMATONE:
        _, response = signal.sosfreqz(spec.coefficients, worN=freqs_hz, fs=sample_rate_hz)
    else:
        _, response = signal.freqz(spec.coefficients, [1.0], worN=freqs_hz, fs=sample_rate_hz)
    return response


def export_coefficients(bank: FilterBank, path) -> Path:
    """Write the bank as a text table: one line per channel, coefficients flattened."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"# sample_rate_hz {bank.sample_rate_hz}",
        "# index kind center_freq_hz bandwidth_hz order n_coefficients coefficients...",
    ]
    for spec in bank.channels:
        flat = np.ravel(spec.coefficients)
        coeffs = " ".join(f"{c:.17g}" for c in flat)
        lines.append(
            f"{spec.index} {spec.kind.value} {spec.center_freq_hz:.6f} "
            f"{spec.bandwidth_hz:.6f} {spec.order} {flat.size} {coeffs}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Exported {len(bank)} channel coefficients to {path}")
    return path
