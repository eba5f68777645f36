"""WAV parsing, PCM scaling and clipping."""

import struct

import numpy as np
import pytest

from pmf_sasv.audio_io import (
    AudioBuffer,
    EmptyAudioError,
    MalformedWavError,
    NonFiniteSampleError,
    UnsupportedFormatError,
    clip_to_unit,
    read_wav,
    to_pcm16,
    write_wav,
)


def wav_bytes(pcm, rate=16000, channels=1, bits=16, fmt_tag=1, extra_chunk=b""):
    data = np.asarray(pcm, dtype="<i2").tobytes()
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", fmt_tag, channels, rate, rate * block_align, block_align, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + extra_chunk
    body += b"data" + struct.pack("<I", len(data)) + data
    return b"RIFF" + struct.pack("<I", len(body)) + body


class TestReadWav:

    def test_scaling_of_extreme_codes(self, tmp_path):
        path = tmp_path / "x.wav"
        path.write_bytes(wav_bytes([-32768, 0, 16384, 32767]))
        audio = read_wav(path)
        np.testing.assert_array_equal(audio.samples, [-1.0, 0.0, 0.5, 32767 / 32768])
        assert audio.sample_rate_hz == 16000
        assert audio.source_id == "x"

    def test_unknown_chunks_are_skipped(self, tmp_path):
        # Odd-sized chunk exercises the pad byte
        chunk = b"LIST" + struct.pack("<I", 3) + b"abc" + b"\x00"
        path = tmp_path / "list.wav"
        path.write_bytes(wav_bytes([1, 2, 3], extra_chunk=chunk))
        np.testing.assert_array_equal(read_wav(path).samples * 32768, [1, 2, 3])

    def test_stereo_is_rejected(self, tmp_path):
        path = tmp_path / "stereo.wav"
        path.write_bytes(wav_bytes([0, 0, 0, 0], channels=2))
        with pytest.raises(UnsupportedFormatError):
            read_wav(path)

    def test_float_format_is_rejected(self, tmp_path):
        path = tmp_path / "float.wav"
        path.write_bytes(wav_bytes([0, 0], fmt_tag=3))
        with pytest.raises(UnsupportedFormatError):
            read_wav(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.wav"
        path.write_bytes(b"RIFX" + wav_bytes([0])[4:])
        with pytest.raises(MalformedWavError) as info:
            read_wav(path)
        assert info.value.offset == 0

    def test_truncated_data_chunk(self, tmp_path):
        path = tmp_path / "short.wav"
        path.write_bytes(wav_bytes([1, 2, 3, 4])[:-4])
        with pytest.raises(MalformedWavError):
            read_wav(path)

    def test_zero_samples(self, tmp_path):
        path = tmp_path / "empty.wav"
        path.write_bytes(wav_bytes([]))
        with pytest.raises(EmptyAudioError):
            read_wav(path)


class TestWriteWav:

    def test_write_then_read_preserves_pcm_codes(self, tmp_path, rng):
        pcm = rng.integers(-32768, 32768, size=500).astype(np.int16)
        path = write_wav(tmp_path / "r.wav", pcm, 8000)
        audio = read_wav(path)
        assert audio.sample_rate_hz == 8000
        np.testing.assert_array_equal(to_pcm16(audio.samples), pcm)

    def test_to_pcm16_saturates(self):
        np.testing.assert_array_equal(to_pcm16([-1.0, 1.0, 0.5]), [-32768, 32767, 16384])


class TestClipping:

    def test_clip_preserves_length_and_order(self):
        out = clip_to_unit([-3.0, -0.5, 0.0, 0.25, 7.0])
        np.testing.assert_array_equal(out, [-1.0, -0.5, 0.0, 0.25, 1.0])

    def test_clip_rejects_nan(self):
        with pytest.raises(NonFiniteSampleError):
            clip_to_unit([0.0, np.nan])

    def test_buffer_rejects_out_of_range(self):
        with pytest.raises(Exception):
            AudioBuffer(samples=[0.0, 1.5], sample_rate_hz=16000, source_id="x")
