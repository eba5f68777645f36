"""Gammatone / inverse Gammatone bank design."""

import numpy as np
import pytest
from pydantic import ValidationError

from pmf_sasv.filterbank import (
    BadChannelIndexError,
    FilterBankConfig,
    FilterKind,
    InvalidFrequencyRangeError,
    SampleRateMismatchError,
    apply_channel,
    channel_response,
    design_bank,
    erb_rate,
    erb_space,
    export_coefficients,
)
from pmf_sasv.audio_io import AudioBuffer

from helpers import SAMPLE_RATE, noise_audio


class TestLayout:

    def test_default_bank_has_twenty_channels(self, full_bank):
        assert len(full_bank) == 20
        assert full_bank.n_pairs == 10
        kinds = [c.kind for c in full_bank.channels]
        assert kinds == [FilterKind.GAMMATONE] * 10 + [FilterKind.INVERSE_GAMMATONE] * 10

    def test_centers_ascending_and_shared_by_pairs(self, full_bank):
        centers = full_bank.center_frequencies()
        assert np.all(np.diff(centers) > 0)
        assert centers[0] == pytest.approx(100.0)
        assert centers[-1] == pytest.approx(7000.0)
        for k in range(1, 11):
            assert full_bank.channel(k).center_freq_hz == full_bank.channel(k + 10).center_freq_hz

    def test_centers_equally_spaced_on_erb_scale(self):
        steps = np.diff(erb_rate(erb_space(100.0, 7000.0, 10)))
        np.testing.assert_allclose(steps, steps[0], rtol=1e-9)

    def test_channel_index_is_one_based(self, full_bank):
        assert full_bank.channel(1).index == 1
        assert full_bank.channel(20).index == 20
        for bad in (0, 21):
            with pytest.raises(BadChannelIndexError):
                full_bank.channel(bad)

    def test_design_is_deterministic(self, small_bank):
        again = design_bank(SAMPLE_RATE, FilterBankConfig(n_pairs=2, inverse_taps=64))
        for a, b in zip(small_bank.channels, again.channels):
            np.testing.assert_array_equal(a.coefficients, b.coefficients)


class TestResponses:

    def test_gammatone_peak_gain_is_one_near_center(self, full_bank):
        freqs = np.linspace(0.0, SAMPLE_RATE / 2, 8193)
        for k in (1, 5, 10):
            spec = full_bank.channel(k)
            magnitude = np.abs(channel_response(spec, freqs, SAMPLE_RATE))
            assert magnitude.max() == pytest.approx(1.0, abs=1e-6)
            assert abs(freqs[np.argmax(magnitude)] - spec.center_freq_hz) < spec.bandwidth_hz

    def test_inverse_channel_notches_the_band(self, full_bank):
        spec = full_bank.channel(15)
        cf = spec.center_freq_hz
        at_center = abs(channel_response(spec, [cf], SAMPLE_RATE)[0])
        far_away = abs(channel_response(spec, [cf * 4], SAMPLE_RATE)[0])
        assert at_center < 0.5
        assert far_away > 0.8


class TestErrors:

    def test_max_cf_at_or_above_nyquist(self):
        with pytest.raises(InvalidFrequencyRangeError):
            design_bank(8000, FilterBankConfig(max_cf_hz=4000.0))

    def test_low_sample_rate(self):
        with pytest.raises(InvalidFrequencyRangeError):
            design_bank(4000, FilterBankConfig(max_cf_hz=1000.0))

    def test_inverted_range_fails_validation(self):
        with pytest.raises(ValidationError):
            FilterBankConfig(min_cf_hz=5000.0, max_cf_hz=1000.0)

    def test_sample_rate_mismatch(self, small_bank):
        audio = AudioBuffer(samples=np.zeros(100), sample_rate_hz=8000, source_id="x")
        with pytest.raises(SampleRateMismatchError):
            apply_channel(small_bank, 1, audio)


def test_apply_channel_keeps_length(small_bank, rng):
    audio = noise_audio(rng)
    for n in range(1, len(small_bank) + 1):
        out = apply_channel(small_bank, n, audio)
        assert out.shape == audio.samples.shape
        assert np.all(np.isfinite(out))


def test_export_coefficients(small_bank, tmp_path):
    path = export_coefficients(small_bank, tmp_path / "bank.txt")
    lines = path.read_text().splitlines()
    assert lines[0] == f"# sample_rate_hz {SAMPLE_RATE}"
    body = lines[2:]
    assert len(body) == len(small_bank)
    fields = body[-1].split()
    assert fields[1] == "inverse_gammatone"
    assert int(fields[5]) == 64
    assert len(fields) == 6 + 64
