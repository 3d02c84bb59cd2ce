import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wmbench.audio import (Spectrogram, StftConfig, Waveform, is_cola, istft, read_pcm, resample,
                           resample_array, snr_db, stft, write_pcm)
from wmbench.errors import (CorruptHeader, EmptyInput, InconsistentShape, IoFailure,
                            UnsupportedFormat)
from wmbench.synth import sine


def _wav_bytes(payload: bytes, tag=1, channels=1, rate=16000, bits=16):
    block = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block, block, bits)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    return b"RIFF" + struct.pack("<I", len(body)) + body


def _peak_hz(x, sr):
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x))))
    return np.argmax(spec) * sr / len(x)


# -- waveform ---------------------------------------------------------------

def test_waveform_rejects_nonfinite_and_bad_rate():
    with pytest.raises(ValueError):
        Waveform([0.0, np.nan])
    with pytest.raises(ValueError):
        Waveform([0.0], sample_rate=0)


def test_waveform_is_read_only():
    w = Waveform(np.zeros(4))
    with pytest.raises(ValueError):
        w.samples[0] = 1.0


# -- PCM I/O ----------------------------------------------------------------

def test_read_16bit_normalisation(tmp_path):
    p = tmp_path / "a.wav"
    p.write_bytes(_wav_bytes(struct.pack("<hh", 16384, -32768)))
    w = read_pcm(p)
    assert w.samples.tolist() == [0.5, -1.0]
    assert w.sample_rate == 16000


def test_read_all_zero_file(tmp_path):
    p = tmp_path / "z.wav"
    p.write_bytes(_wav_bytes(b"\x00\x00" * 16000))
    w = read_pcm(p)
    assert len(w) == 16000 and not np.any(w.samples)


def test_stereo_keeps_first_channel(tmp_path):
    p = tmp_path / "s.wav"
    p.write_bytes(_wav_bytes(struct.pack("<hhhh", 100, -5, 200, -6), channels=2))
    assert np.allclose(read_pcm(p).samples * 32768, [100, 200])


def test_write_clamps_at_16_bit(tmp_path):
    p = tmp_path / "c.wav"
    write_pcm(Waveform([1.5, -1.5, 0.5]), p, bit_depth=16)
    x = read_pcm(p).samples
    assert x[0] == 32767 / 32768
    assert x[1] == -1.0
    assert abs(x[2] - 0.5) <= 1 / 32768


@given(st.lists(st.floats(-1, 1, width=32), min_size=1, max_size=200))
def test_float32_round_trip_is_lossless(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("f") / "f.wav"
    w = Waveform(np.array(values, dtype=np.float32))
    write_pcm(w, p, bit_depth=32)
    assert np.array_equal(read_pcm(p).samples, w.samples)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=200))
def test_16bit_error_within_one_step(tmp_path_factory, values):
    p = tmp_path_factory.mktemp("i") / "i.wav"
    w = Waveform(values)
    write_pcm(w, p)
    back = read_pcm(p)
    assert np.max(np.abs(back.samples - w.samples)) <= 2**-15
    write_pcm(back, p)
    assert np.array_equal(read_pcm(p).samples, back.samples)


def test_read_errors(tmp_path):
    with pytest.raises(IoFailure):
        read_pcm(tmp_path / "missing.wav")
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"not a wave file")
    with pytest.raises(CorruptHeader):
        read_pcm(bad)
    alaw = tmp_path / "alaw.wav"
    alaw.write_bytes(_wav_bytes(b"\x00" * 8, tag=6, bits=8))
    with pytest.raises(UnsupportedFormat):
        read_pcm(alaw)
    multi = tmp_path / "multi.wav"
    multi.write_bytes(_wav_bytes(b"\x00" * 12, channels=6))
    with pytest.raises(UnsupportedFormat):
        read_pcm(multi)


def test_write_rejects_bad_depth_and_path(tmp_path):
    with pytest.raises(UnsupportedFormat):
        write_pcm(Waveform([0.0]), tmp_path / "x.wav", bit_depth=12)
    with pytest.raises(IoFailure):
        write_pcm(Waveform([0.0]), tmp_path / "no" / "dir" / "x.wav")


# -- STFT -------------------------------------------------------------------

def test_config_validation():
    assert is_cola(StftConfig().window_array(), 512)
    with pytest.raises(ValueError):
        StftConfig(fft_size=1023)
    with pytest.raises(ValueError):
        StftConfig(hop=2048)
    with pytest.raises(ValueError):
        StftConfig(window="boxcar", hop=300)


def test_frame_count_and_shape():
    cfg = StftConfig()
    for n in (1, 511, 512, 513, 16000):
        s = stft(Waveform(np.ones(n)), cfg)
        assert s.frames.shape == (1 + -(-(n - 1) // 512), 513)


def test_zeros_give_zero_spectrogram():
    assert not np.any(stft(Waveform(np.zeros(3000))).frames)


def test_empty_input_rejected():
    with pytest.raises(EmptyInput):
        stft(Waveform([]))


def test_bin_centred_sine_concentrates_energy():
    cfg = StftConfig()
    k = 64
    w = sine(k * 16000 / cfg.fft_size, 1.0)
    mag2 = np.abs(stft(w, cfg).frames[2:-2]) ** 2
    assert np.all(mag2[:, k - 1:k + 2].sum(axis=1) / mag2.sum(axis=1) >= 0.9)


def test_parseval_per_frame(rng):
    cfg = StftConfig()
    x = rng.standard_normal(8000)
    s = stft(Waveform(x), cfg)
    # full two-sided spectrum energy equals N * windowed-frame energy
    full = np.concatenate((s.frames, np.conj(s.frames[:, -2:0:-1])), axis=1)
    half = cfg.fft_size // 2
    padded = np.pad(x, (half, s.num_frames * cfg.hop), mode="reflect")
    for t in (3, 7):
        seg = padded[t * cfg.hop:t * cfg.hop + cfg.fft_size] * cfg.window_array()
        assert np.isclose(np.sum(np.abs(full[t]) ** 2), cfg.fft_size * np.sum(seg**2))


@given(st.integers(1600, 40000), st.integers(0, 2**32 - 1))
def test_perfect_reconstruction(n, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    y = istft(stft(Waveform(x))).samples
    assert len(y) == n
    assert np.sqrt(np.mean((y - x) ** 2)) / np.sqrt(np.mean(x**2)) <= 1e-6


def test_istft_zero_and_truncation():
    cfg = StftConfig()
    s = Spectrogram(np.zeros((5, cfg.n_bins), complex), cfg, 1500)
    out = istft(s)
    assert len(out) == 1500 and not np.any(out.samples)


def test_spectrogram_shape_checks():
    cfg = StftConfig()
    with pytest.raises(InconsistentShape):
        Spectrogram(np.zeros((4, 100), complex), cfg, 100)
    with pytest.raises(InconsistentShape):
        Spectrogram(np.zeros((2, cfg.n_bins), complex), cfg, 5000)


def test_stft_is_deterministic(rng):
    w = Waveform(rng.standard_normal(5000))
    assert np.array_equal(stft(w).frames, stft(w).frames)


# -- resampling -------------------------------------------------------------

def test_resample_identity():
    w = sine(440, 0.3)
    assert resample(w, 16000) is w


def test_resample_keeps_frequency():
    y = resample(sine(440, 1.0), 48000)
    assert abs(len(y) - 48000) <= 1
    assert abs(_peak_hz(y.samples, 48000) - 440) <= 1.0


def test_down_up_correlation():
    w = sine(1000, 1.0)
    back = resample(resample(w, 8000), 16000)
    assert abs(len(back) - len(w)) <= 1
    n = min(len(back), len(w))
    assert np.corrcoef(back.samples[:n], w.samples[:n])[0, 1] >= 0.99


@given(st.floats(-4, 4), st.integers(0, 2**32 - 1))
def test_resample_is_linear(a, seed):
    x = np.random.default_rng(seed).standard_normal(500)
    assert np.allclose(resample_array(a * x, 16000, 22050), a * resample_array(x, 16000, 22050),
                       rtol=1e-12, atol=1e-12)


def test_resample_rejects_bad_rate():
    with pytest.raises(ValueError):
        resample(sine(440, 0.1), 0)


def test_snr_db():
    x = np.ones(100)
    assert snr_db(x, x) == np.inf
    assert np.isclose(snr_db(x, x + 0.1), 20.0)
