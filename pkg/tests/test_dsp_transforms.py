import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wmbench.audio import StftConfig, Waveform, snr_db, stft
from wmbench.dsp import (add_noise, clip_percentile, compress_dynamics, convolve_rir, equalize,
                         mask_frequencies, mix_at_snr, noise_gate, overdrive, pitch_shift,
                         quantize, synthetic_rir, time_stretch, trim, trim_random)
from wmbench.dsp.dynamics import nearest_rank
from wmbench.dsp.spectral import EQ_CENTERS_HZ, choose_mask_bins
from wmbench.errors import RangeViolation, SilentCarrier, SilentImpulse, TooShort
from wmbench.synth import sine, white_noise

SR = 16000


def _rms_db(x):
    return 20 * np.log10(np.sqrt(np.mean(np.square(x))))


def _peak_hz(x, sr=SR):
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x)), n=8 * len(x)))
    return np.argmax(spec) * sr / (8 * len(x))


# -- noise ------------------------------------------------------------------

@pytest.mark.parametrize("snr", [5.0, 10.0, 15.0])
def test_gaussian_snr(speech, snr):
    rng = np.random.default_rng(int(snr))
    for w in speech:
        y = add_noise(w, snr, rng=rng)
        assert abs(snr_db(w.samples, y.samples) - snr) <= 0.1


def test_high_snr_is_near_identity(speech):
    y = add_noise(speech[1], 100.0, rng=np.random.default_rng(0))
    assert abs(y.rms() / speech[1].rms() - 1) <= 1e-2


def test_corpus_clip_is_tiled(speech):
    w = speech[3]
    clip = np.random.default_rng(0).standard_normal(8000)
    mix = mix_at_snr(w, clip, 10.0)
    added = (mix.output.samples - w.samples) / mix.noise_gain
    assert np.allclose(added, np.resize(clip, len(w)))


def test_silent_carrier():
    with pytest.raises(SilentCarrier):
        add_noise(Waveform(np.zeros(100)), 10.0, rng=np.random.default_rng(0))


def test_overflow_renormalises():
    w = Waveform(np.full(1000, 0.99))
    mix = mix_at_snr(w, np.random.default_rng(0).standard_normal(1000), 0.0)
    assert mix.scale < 1.0
    assert np.isclose(np.max(np.abs(mix.output.samples)), 0.999)


def test_rir_impulse_cases(speech):
    w = speech[1]
    assert np.array_equal(convolve_rir(w, np.array([1.0])).samples, w.samples)
    d = np.zeros(11)
    d[10] = 0.5  # rescaled to unit peak
    y = convolve_rir(w, d).samples
    assert np.allclose(y[10:], w.samples[:-10]) and not np.any(y[:10])
    h = synthetic_rir(np.random.default_rng(0), SR, 0.5)
    assert len(convolve_rir(w, h)) == len(w)
    with pytest.raises(SilentImpulse):
        convolve_rir(w, np.zeros(5))


# -- dynamics ---------------------------------------------------------------

def test_quantize_examples():
    assert quantize(Waveform([0.5]), 8).samples[0] == 64 / 127
    grid = np.arange(-32767, 32768, 997) / 32767
    assert np.array_equal(quantize(Waveform(grid), 16).samples, grid)
    w = Waveform([0.123456789])
    assert quantize(w, 32).samples[0] == 0.123456789
    with pytest.raises(ValueError):
        quantize(w, 12)


@given(st.lists(st.floats(-1.5, 1.5), min_size=1, max_size=100))
def test_quantize_8bit_grid(values):
    y = quantize(Waveform(values), 8).samples * 127
    assert np.allclose(y, np.round(y)) and np.all(np.abs(y) <= 127)


def test_compressor_below_threshold_is_identity():
    w = sine(440, 0.5, amplitude=0.01)  # about -43 dBFS peak
    assert np.array_equal(compress_dynamics(w, -30.0, 4.0).samples, w.samples)


def test_compressor_static_curve():
    w = sine(1000, 1.0, amplitude=1.0)
    y = compress_dynamics(w, -20.0, 4.0).samples[8000:]
    assert abs(20 * np.log10(np.max(np.abs(y))) + 15.0) <= 1.0
    # ratio 2: output level rises 0.5 dB per input dB above threshold
    lv = [20 * np.log10(np.max(np.abs(compress_dynamics(sine(1000, 1.0, amplitude=a), -30.0, 2.0)
                                      .samples[8000:]))) for a in (0.1, 1.0)]
    assert abs((lv[1] - lv[0]) / 20.0 - 0.5) <= 0.05


def test_percentiles_nearest_rank():
    x = np.arange(1, 101) / 100
    assert nearest_rank(x, 1) == 0.01 and nearest_rank(x, 99) == 0.99
    w = Waveform(np.full(50, 0.3))
    assert np.array_equal(clip_percentile(w).samples, w.samples)


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=300))
def test_clip_bounds(values):
    w = Waveform(values)
    s = np.sort(w.samples)
    y = clip_percentile(w).samples
    assert y.min() >= nearest_rank(s, 1) and y.max() <= nearest_rank(s, 99)


def test_overdrive():
    assert not np.any(overdrive(Waveform(np.zeros(10)), 0, 0).samples)
    w = sine(200, 1.0, amplitude=0.1)
    y = overdrive(w, 20.0, 0.0).samples
    assert abs(np.max(np.abs(y)) - w.peak()) <= 1e-6
    spec = np.abs(np.fft.rfft(y))
    assert 20 * np.log10(spec[600] / spec[200]) > -40


# -- trimming ---------------------------------------------------------------

def test_trim_random_contract(speech):
    w = speech[3]
    rng = np.random.default_rng(3)
    for _ in range(20):
        y = trim_random(w, rng)
        assert 0.5 * len(w) <= len(y) <= len(w)
        start = int(np.flatnonzero(w.samples == y.samples[0])[0])
        assert np.array_equal(w.samples[start:start + len(y)], y.samples)
    a = trim_random(w, np.random.default_rng(5))
    b = trim_random(w, np.random.default_rng(5))
    assert np.array_equal(a.samples, b.samples)
    with pytest.raises(TooShort):
        trim_random(speech[0], rng)
    with pytest.raises(ValueError):
        trim(w, 10, 5)


# -- spectral ---------------------------------------------------------------

def test_equalizer_identity_and_band_gain():
    w = sine(1000, 1.0, amplitude=0.1)
    assert np.array_equal(equalize(w, [0.0] * 7).samples, w.samples)
    for g in (12.0, -12.0):
        gains = [0.0] * 7
        gains[EQ_CENTERS_HZ.index(1000.0)] = g
        y = equalize(w, gains).samples
        assert abs(_rms_db(y[4000:]) - _rms_db(w.samples[4000:]) - g) <= 1.0
    with pytest.raises(ValueError):
        equalize(w, [0.0] * 6)


def test_mask_removes_chosen_bins():
    rng = np.random.default_rng(0)
    w = white_noise(rng, 1.0)
    bins = choose_mask_bins(rng, 80, 513)
    y = mask_frequencies(w, bins)
    assert len(y) == len(w)
    assert np.sum(y.samples**2) < np.sum(w.samples**2)
    before = np.sum(np.abs(stft(w).frames[:, bins]) ** 2)
    after = np.sum(np.abs(stft(y).frames[:, bins]) ** 2)
    assert 10 * np.log10(after / before) <= -40


def test_mask_range_checks():
    w = white_noise(np.random.default_rng(0), 0.5)
    with pytest.raises(RangeViolation):
        mask_frequencies(w, list(range(9)))
    with pytest.raises(RangeViolation):
        mask_frequencies(w, list(range(81)))
    with pytest.raises(RangeViolation):
        choose_mask_bins(np.random.default_rng(0), 9, 513)
    assert len(set(choose_mask_bins(np.random.default_rng(0), 10, 513))) == 10


def test_noise_gate_contracts():
    assert not np.any(noise_gate(Waveform(np.zeros(8000))).samples)
    rng = np.random.default_rng(2)
    n = 3 * SR
    hiss = rng.standard_normal(n) * 10 ** (-40 / 20)
    tone = np.zeros(n)
    tone[:2 * SR] = 0.5 * np.sin(2 * np.pi * 1000 * np.arange(2 * SR) / SR)
    y = noise_gate(Waveform(tone + hiss)).samples
    tail = slice(2 * SR + 2048, n)
    assert _rms_db(hiss[tail]) - _rms_db(y[tail]) >= 20
    flat = Waveform(0.3 * np.sin(2 * np.pi * 440 * np.arange(SR) / SR))
    assert abs(_rms_db(noise_gate(flat).samples) - _rms_db(flat.samples)) <= 1.0


# -- time scale -------------------------------------------------------------

@pytest.mark.parametrize("rate", [0.5, 1.0, 2.0])
def test_time_stretch_length(rate):
    w = sine(440, 1.0)
    y = time_stretch(w, rate)
    assert abs(len(y) - round(len(w) / rate)) <= 256
    if rate == 1.0:
        assert np.corrcoef(y.samples, w.samples)[0, 1] >= 0.99
    if rate == 0.5:
        assert abs(_peak_hz(y.samples) - 440) <= 4.4


@pytest.mark.parametrize("semis,target", [(5, 440 * 2 ** (5 / 12)), (-5, 440 * 2 ** (-5 / 12)),
                                          (0, 440.0)])
def test_pitch_shift(semis, target):
    w = sine(440, 1.0)
    y = pitch_shift(w, semis)
    assert len(y) == len(w)
    assert abs(_peak_hz(y.samples) - target) <= 0.01 * target


def test_timescale_ranges():
    w = sine(440, 0.5)
    with pytest.raises(ValueError):
        time_stretch(w, 2.5)
    with pytest.raises(ValueError):
        pitch_shift(w, 6)


def test_custom_stft_config_for_mask():
    cfg = StftConfig(fft_size=512, hop=256)
    w = white_noise(np.random.default_rng(1), 0.5)
    assert len(mask_frequencies(w, list(range(20, 40)), cfg)) == len(w)
