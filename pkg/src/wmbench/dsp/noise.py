"""Additive noise and room reverberation."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal

from ..audio import Waveform, require_content
from ..errors import SilentCarrier, SilentImpulse
from ..synth import pink_noise

log = logging.getLogger(__name__)

RENORM_PEAK = 0.999


@dataclass(frozen=True)
class NoiseMix:
    output: Waveform
    noise_gain: float
    scale: float  # < 1 only when the mix was renormalised to avoid clipping


def bounded(x: np.ndarray) -> tuple[np.ndarray, float]:
    """Scale ``x`` down to ``RENORM_PEAK`` if any sample exceeds full scale."""
    peak = float(np.max(np.abs(x))) if len(x) else 0.0
    if peak > 1.0:
        s = RENORM_PEAK / peak
        return x * s, s
    return x, 1.0


def mix_at_snr(w: Waveform, noise: np.ndarray, snr_db: float) -> NoiseMix:
    require_content(w)
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    p_sig = float(np.mean(w.samples**2))
    if p_sig == 0.0:
        raise SilentCarrier("cannot set an SNR against a silent carrier")
    n = np.resize(np.asarray(noise, dtype=np.float64), len(w))  # tiles end-to-end
    p_noise = float(np.mean(n**2))
    if p_noise == 0.0:
        raise ValueError("noise clip is silent")
    g = np.sqrt(p_sig / (p_noise * 10.0 ** (snr_db / 10.0)))
    out, s = bounded(w.samples + g * n)
    if s < 1.0:
        log.info("noise mix renormalised by %.4f to avoid clipping", s)
    return NoiseMix(w.replace(out), float(g), s)


def add_noise(w: Waveform, snr_db: float, *, noise: Waveform | np.ndarray | None = None,
              rng: np.random.Generator | None = None) -> Waveform:
    """Add Gaussian noise (``noise=None``) or a tiled noise clip at ``snr_db``."""
    if noise is None:
        if rng is None:
            raise ValueError("gaussian noise needs an rng")
        n = rng.standard_normal(len(w))
    else:
        n = noise.samples if isinstance(noise, Waveform) else np.asarray(noise, dtype=np.float64)
        if len(n) == 0:
            raise ValueError("noise clip is empty")
    return mix_at_snr(w, n, snr_db).output


def synthetic_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    """Stand-in for a noise corpus clip: unit-RMS pink noise."""
    return pink_noise(rng, n)


def synthetic_rir(rng: np.random.Generator, sample_rate: int = 16000,
                  rt60: float | None = None) -> np.ndarray:
    """Exponentially decaying noise tail behind a unit direct path."""
    if rt60 is None:
        rt60 = float(rng.uniform(0.2, 0.8))
    n = max(2, int(rt60 * sample_rate))
    t = np.arange(n) / sample_rate
    # 60 dB of amplitude decay over rt60
    h = rng.standard_normal(n) * np.exp(-6.9078 * t / rt60) * 0.3
    pre = int(rng.integers(8, 48))  # early gap between direct path and tail
    h[:pre] = 0.0
    h[0] = 1.0
    return h


def convolve_rir(w: Waveform, rir: Waveform | np.ndarray) -> Waveform:
    """Convolve with a unit-peak copy of ``rir``, truncated to the input length."""
    require_content(w)
    h = rir.samples if isinstance(rir, Waveform) else np.asarray(rir, dtype=np.float64)
    if len(h) == 0 or not np.any(h):
        raise SilentImpulse("impulse response is empty or all zero")
    h = h / np.max(np.abs(h))
    y = signal.convolve(w.samples, h, mode="full")[: len(w)]
    return w.replace(bounded(y)[0])
