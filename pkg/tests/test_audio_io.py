"""WAV reading and writing against scipy's reference implementation."""

import io

import numpy as np
import pytest
import scipy.io.wavfile

from noisebands.audio_io import read_wav, wav_bytes, write_wav


class TestWrite:
    def test_float32_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        audio = rng.uniform(-0.9, 0.9, 4000)
        path = tmp_path / "f.wav"
        write_wav(path, 16000.0, audio)
        rate, back = read_wav(path)
        assert rate == 16000.0
        np.testing.assert_allclose(back, audio, atol=1e-7)

    def test_pcm16_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        audio = rng.uniform(-0.9, 0.9, 4000)
        path = tmp_path / "p.wav"
        write_wav(path, 8000.0, audio, pcm16=True)
        rate, back = read_wav(path)
        assert rate == 8000.0
        # interior samples quantise to the nearest 1/32768 step
        np.testing.assert_allclose(back, audio, atol=0.5 / 32768 + 1e-12)

    def test_pcm16_full_scale_edges(self, tmp_path):
        # -1.0 is exactly representable; +1.0 clips to 32767 (one step low)
        audio = np.array([-1.0, 1.0, 0.0])
        path = tmp_path / "fs.wav"
        write_wav(path, 8000.0, audio, pcm16=True)
        _, back = read_wav(path)
        assert back[0] == -1.0
        assert back[2] == 0.0
        assert abs(back[1] - (32767.0 / 32768.0)) < 1e-12

    def test_scipy_reads_our_float32(self, tmp_path):
        audio = np.linspace(-0.5, 0.5, 100)
        path = tmp_path / "f.wav"
        write_wav(path, 44100.0, audio)
        rate, data = scipy.io.wavfile.read(path)
        assert rate == 44100
        assert data.dtype == np.float32
        np.testing.assert_allclose(data, audio, atol=1e-7)

    def test_stereo_channel_major(self, tmp_path):
        left = np.full(64, 0.25)
        right = np.full(64, -0.25)
        path = tmp_path / "s.wav"
        write_wav(path, 22050.0, np.stack([left, right]))
        rate, data = scipy.io.wavfile.read(path)
        assert data.shape == (64, 2)
        np.testing.assert_allclose(data[:, 0], left, atol=1e-7)
        np.testing.assert_allclose(data[:, 1], right, atol=1e-7)


class TestRead:
    def test_reads_scipy_pcm16(self, tmp_path):
        audio = (np.sin(np.linspace(0, 20, 500)) * 20000).astype(np.int16)
        path = tmp_path / "i16.wav"
        scipy.io.wavfile.write(path, 8000, audio)
        rate, back = read_wav(path)
        assert rate == 8000.0
        np.testing.assert_allclose(back, audio / 32768.0, atol=1e-9)

    def test_reads_scipy_int32(self, tmp_path):
        audio = (np.sin(np.linspace(0, 20, 500)) * 2**30).astype(np.int32)
        path = tmp_path / "i32.wav"
        scipy.io.wavfile.write(path, 48000, audio)
        _, back = read_wav(path)
        np.testing.assert_allclose(back, audio / 2**31, atol=1e-9)

    def test_reads_scipy_float32(self, tmp_path):
        audio = np.sin(np.linspace(0, 20, 500)).astype(np.float32)
        path = tmp_path / "f32.wav"
        scipy.io.wavfile.write(path, 16000, audio)
        _, back = read_wav(path)
        np.testing.assert_allclose(back, audio, atol=1e-9)

    def test_stereo_downmixes_to_mono_mean(self, tmp_path):
        data = np.stack([np.full(32, 0.5, np.float32), np.full(32, -0.1, np.float32)], axis=1)
        path = tmp_path / "st.wav"
        scipy.io.wavfile.write(path, 8000, data)
        _, back = read_wav(path)
        np.testing.assert_allclose(back, np.full(32, 0.2), atol=1e-7)

    def test_stereo_kept_when_mono_disabled(self, tmp_path):
        data = np.stack([np.full(32, 0.5, np.float32), np.full(32, -0.1, np.float32)], axis=1)
        path = tmp_path / "st.wav"
        scipy.io.wavfile.write(path, 8000, data)
        _, back = read_wav(path, mono=False)
        assert back.ndim == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_wav(tmp_path / "nope.wav")


class TestWavBytes:
    def test_bytes_match_file_content(self, tmp_path):
        audio = np.linspace(-0.3, 0.3, 256)
        blob = wav_bytes(44100.0, audio)
        path = tmp_path / "b.wav"
        write_wav(path, 44100.0, audio)
        assert blob == path.read_bytes()

    def test_bytes_parse_as_wav(self):
        audio = np.linspace(-0.3, 0.3, 256)
        blob = wav_bytes(22050.0, audio, pcm16=True)
        rate, data = scipy.io.wavfile.read(io.BytesIO(blob))
        assert rate == 22050
        assert data.shape == (256,)
