"""Sample-wise level and nonlinearity conditions."""

from __future__ import annotations

import math

import numpy as np

from .. import kernels
from ..audio import Waveform, require_content

QUANT_BITS = (8, 16, 24, 32)


def quantize(w: Waveform, bits: int) -> Waveform:
    if bits not in QUANT_BITS:
        raise ValueError(f"bits must be one of {QUANT_BITS}, got {bits}")
    x = np.clip(w.samples, -1.0, 1.0)
    if bits == 32:
        # float pass-through; 32-bit integer steps are below float64 noise here
        return w.replace(x)
    q = float(2 ** (bits - 1) - 1)
    return w.replace(np.clip(np.round(x * q) / q, -1.0, 1.0))


def _one_pole(time_s: float, sample_rate: int) -> float:
    return math.exp(-1.0 / (time_s * sample_rate))


def compress_dynamics(w: Waveform, threshold_db: float, ratio: float,
                      attack_s: float = 0.005, release_s: float = 0.050) -> Waveform:
    """Feed-forward hard-knee compressor, no makeup gain.

    The detector is a peak-style one-pole follower on ``|x|`` (attack while
    rising, release while falling) converted to dB.
    """
    if ratio < 1.0:
        raise ValueError("ratio must be >= 1")
    x = w.samples
    if len(x) == 0:
        return w
    env = kernels.envelope_follower(np.ascontiguousarray(np.abs(x)),
                                    _one_pole(attack_s, w.sample_rate),
                                    _one_pole(release_s, w.sample_rate))
    level_db = 20.0 * np.log10(np.maximum(env, 1e-12))
    over = np.maximum(level_db - threshold_db, 0.0)
    gain = 10.0 ** (-over * (1.0 - 1.0 / ratio) / 20.0)
    return w.replace(x * gain)


def nearest_rank(sorted_x: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile of an ascending array."""
    n = len(sorted_x)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return float(sorted_x[min(rank, n) - 1])


def clip_percentile(w: Waveform, lo_pct: float = 1.0, hi_pct: float = 99.0) -> Waveform:
    if not 0.0 <= lo_pct < hi_pct <= 100.0:
        raise ValueError("need 0 <= lo_pct < hi_pct <= 100")
    require_content(w)
    s = np.sort(w.samples)
    return w.replace(np.clip(w.samples, nearest_rank(s, lo_pct), nearest_rank(s, hi_pct)))


def overdrive(w: Waveform, gain_db: float, colour: float) -> Waveform:
    """Soft-cubic drive with a colour offset, then mean removal and peak matching."""
    x = w.samples
    if len(x) == 0:
        return w
    u = np.clip(10.0 ** (gain_db / 20.0) * x + colour / 200.0, -1.0, 1.0)
    y = 1.5 * (u - u**3 / 3.0)
    y = y - y.mean()
    in_peak = float(np.max(np.abs(x)))
    out_peak = float(np.max(np.abs(y)))
    if out_peak == 0.0 or in_peak == 0.0:
        return w.replace(np.zeros_like(x))
    return w.replace(y * (in_peak / out_peak))
