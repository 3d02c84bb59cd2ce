"""Speech-like test signals.

Real fixtures are additive harmonic sources with a drifting pitch contour,
shaped by moving formant envelopes and a syllabic amplitude envelope. Fake
fixtures use a different excitation: a rigidly periodic source with random
harmonic phases and a larger share of noise excitation. None of this is meant
to look like real speech to a detector; it feeds plumbing tests and watermark
round trips.
"""

from __future__ import annotations

import numpy as np
from scipy import signal

from .audio import DEFAULT_SAMPLE_RATE, Waveform

# (F1, F2, F3) in Hz for a handful of vowels
_VOWELS = np.array([
    [730, 1090, 2440],
    [270, 2290, 3010],
    [300, 870, 2240],
    [530, 1840, 2480],
    [570, 840, 2410],
    [660, 1720, 2410],
    [440, 1020, 2240],
])
_BANDWIDTHS = np.array([90.0, 120.0, 180.0])


def _formant_gain(freqs, formants):
    # freqs (..., H), formants (..., 3) broadcast over the sample axis
    g = 0.02 + 0.3 * np.exp(-freqs / 3000.0)
    for i in range(3):
        f_i = formants[..., i:i + 1]
        g = g + (1.0 / (i + 1)) * np.exp(-0.5 * ((freqs - f_i) / (_BANDWIDTHS[i] * 2.5)) ** 2)
    return g


def _syllable_track(rng, n, sr):
    """Piecewise-constant vowel choice with cosine crossfades; returns (n, 3)."""
    rate = rng.uniform(3.0, 5.0)
    n_syl = int(np.ceil(n / sr * rate)) + 2
    picks = _VOWELS[rng.integers(0, len(_VOWELS), n_syl)].astype(float)
    picks *= rng.uniform(0.92, 1.08, size=(n_syl, 1))
    pos = np.arange(n) / sr * rate
    idx = np.floor(pos).astype(int)
    frac = pos - idx
    xf = 0.5 - 0.5 * np.cos(np.pi * np.clip((frac - 0.6) / 0.4, 0.0, 1.0))
    track = (1 - xf)[:, None] * picks[idx] + xf[:, None] * picks[idx + 1]
    envelope = 0.15 + 0.85 * np.sin(np.pi * frac) ** 0.6
    return track, envelope


def _harmonic_source(rng, f0, sr, formants, random_phase):
    n = len(f0)
    phase = 2 * np.pi * np.cumsum(f0) / sr
    n_harm = int(7600 // np.max(f0))
    out = np.zeros(n)
    offsets = rng.uniform(0, 2 * np.pi, n_harm) if random_phase else np.zeros(n_harm)
    for h in range(1, n_harm + 1):
        fh = h * f0
        gain = _formant_gain(fh[:, None], formants)[:, 0] / np.sqrt(h)
        gain = np.where(fh < sr / 2 - 400, gain, 0.0)
        out += gain * np.sin(h * phase + offsets[h - 1])
    return out


def _shaped_noise(rng, n, sr, formants):
    # noise shaped by the average formant set of the fixture
    noise = rng.standard_normal(n)
    mean_f = formants.mean(axis=0)
    out = np.zeros(n)
    for i, f_c in enumerate(mean_f):
        sos = signal.butter(2, [max(f_c - 2 * _BANDWIDTHS[i], 50.0), f_c + 2 * _BANDWIDTHS[i]],
                            btype="bandpass", fs=sr, output="sos")
        out += signal.sosfilt(sos, noise) / (i + 1)
    return out


def speech_like(rng: np.random.Generator, duration_s: float, *, fake: bool = False,
                sample_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """One speech-like fixture; ``fake`` switches the excitation statistics."""
    sr = sample_rate
    n = int(round(duration_s * sr))
    t = np.arange(n) / sr
    base = rng.uniform(90.0, 220.0)
    formants, env = _syllable_track(rng, n, sr)

    if fake:
        f0 = np.full(n, base)
        voiced = _harmonic_source(rng, f0, sr, formants, random_phase=True)
        breath = _shaped_noise(rng, n, sr, formants)
        mix = 0.6, 0.4
    else:
        glide = rng.uniform(-0.2, 0.2)
        vib_rate, vib_depth = rng.uniform(4.0, 6.5), rng.uniform(0.01, 0.03)
        f0 = base * (1 + glide * t / max(t[-1], 1e-9)) * (1 + vib_depth * np.sin(2 * np.pi * vib_rate * t))
        f0 *= 1 + 0.004 * signal.sosfilt(signal.butter(1, 30, fs=sr, output="sos"),
                                         rng.standard_normal(n)) * 20
        voiced = _harmonic_source(rng, f0, sr, formants, random_phase=False)
        breath = _shaped_noise(rng, n, sr, formants)
        mix = 0.95, 0.05

    v = voiced / (np.sqrt(np.mean(voiced**2)) + 1e-12)
    b = breath / (np.sqrt(np.mean(breath**2)) + 1e-12)
    x = (mix[0] * v + mix[1] * b) * env

    fade = min(int(0.02 * sr), n // 4)
    if fade:
        ramp = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, fade))
        x[:fade] *= ramp
        x[-fade:] *= ramp[::-1]

    target_rms = rng.uniform(0.05, 0.15)
    x *= target_rms / (np.sqrt(np.mean(x**2)) + 1e-12)
    peak = np.max(np.abs(x))
    if peak > 0.95:
        x *= 0.95 / peak
    return Waveform(x, sr)


def white_noise(rng: np.random.Generator, duration_s: float, rms: float = 0.1,
                sample_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    n = int(round(duration_s * sample_rate))
    return Waveform(np.clip(rms * rng.standard_normal(n), -1, 1), sample_rate)


def pink_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    """Unit-RMS 1/f noise via spectral shaping."""
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.arange(len(spec), dtype=float)
    f[0] = 1.0
    x = np.fft.irfft(spec / np.sqrt(f), n=n)
    return x / (np.sqrt(np.mean(x**2)) + 1e-12)


def sine(freq_hz: float, duration_s: float, amplitude: float = 0.5,
         sample_rate: int = DEFAULT_SAMPLE_RATE, phase: float = 0.0) -> Waveform:
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return Waveform(amplitude * np.sin(2 * np.pi * freq_hz * t + phase), sample_rate)
