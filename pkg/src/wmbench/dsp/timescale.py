"""Trimming, phase-vocoder time stretch and pitch shift."""

from __future__ import annotations

import numpy as np

from .. import kernels
from ..audio import Spectrogram, StftConfig, Waveform, istft, require_content, resample_array, stft
from ..errors import TooShort

# finer hop than the analysis default keeps phase propagation smooth
VOCODER_STFT = StftConfig(fft_size=1024, hop=256)

STRETCH_RANGE = (0.5, 2.0)
PITCH_RANGE = (-5.0, 5.0)


def trim_bounds(rng: np.random.Generator, n: int) -> tuple[int, int]:
    """Start in [0, n/4], end in [3n/4, n]."""
    start = int(rng.integers(0, n // 4 + 1))
    end = int(rng.integers(-(-3 * n // 4), n + 1))
    return start, end


def trim(w: Waveform, start: int, end: int) -> Waveform:
    if not 0 <= start < end <= len(w):
        raise ValueError(f"bad trim bounds [{start}, {end}) for length {len(w)}")
    return w.replace(w.samples[start:end])


def trim_random(w: Waveform, rng: np.random.Generator) -> Waveform:
    if w.duration < 1.0:
        raise TooShort(f"trimming needs at least 1 s, got {w.duration:.3f} s")
    return trim(w, *trim_bounds(rng, len(w)))


def _stretch_array(x: np.ndarray, sample_rate: int, rate: float, cfg: StftConfig) -> np.ndarray:
    n_out = int(round(len(x) / rate))
    s = stft(Waveform(x, sample_rate), cfg)
    frames = s.frames
    if frames.shape[0] < 2:
        frames = np.concatenate((frames, frames), axis=0)
    steps = np.arange(0.0, frames.shape[0], rate)
    advance = 2.0 * np.pi * cfg.hop * np.arange(cfg.n_bins) / cfg.fft_size
    out = kernels.phase_vocoder(np.ascontiguousarray(np.abs(frames)),
                                np.ascontiguousarray(np.angle(frames)),
                                np.ascontiguousarray(steps), np.ascontiguousarray(advance))
    need = cfg.frames_for(n_out)
    if out.shape[0] < need:
        out = np.concatenate((out, np.zeros((need - out.shape[0], cfg.n_bins), complex)), axis=0)
    return istft(Spectrogram(out, cfg, n_out, sample_rate)).samples


def time_stretch(w: Waveform, rate: float, cfg: StftConfig = VOCODER_STFT) -> Waveform:
    """Phase-vocoder stretch; ``rate > 1`` shortens. Output length ``round(len/rate)``."""
    if not STRETCH_RANGE[0] <= rate <= STRETCH_RANGE[1]:
        raise ValueError(f"rate must be in {STRETCH_RANGE}, got {rate}")
    require_content(w)
    return w.replace(_stretch_array(w.samples, w.sample_rate, float(rate), cfg))


def pitch_shift(w: Waveform, semitones: float, cfg: StftConfig = VOCODER_STFT) -> Waveform:
    """Stretch by ``2**(-n/12)`` then resample back to the original duration."""
    if not PITCH_RANGE[0] <= semitones <= PITCH_RANGE[1]:
        raise ValueError(f"semitones must be in {PITCH_RANGE}, got {semitones}")
    require_content(w)
    if semitones == 0:
        return w
    rate = 2.0 ** (-float(semitones) / 12.0)
    stretched = _stretch_array(w.samples, w.sample_rate, rate, cfg)
    y = resample_array(stretched, w.sample_rate / rate, w.sample_rate, n_out=len(w))
    return w.replace(y)


def stretched_length(n: int, rate: float) -> int:
    return int(round(n / rate))


__all__ = ["trim", "trim_bounds", "trim_random", "time_stretch", "pitch_shift",
           "stretched_length", "VOCODER_STFT"]
