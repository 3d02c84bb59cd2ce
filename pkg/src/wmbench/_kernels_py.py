"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Same signatures and the same arithmetic order where it matters; results
agree with the compiled versions to floating-point rounding.
"""

import numpy as np
from scipy import signal


def envelope_follower(x_abs, attack, release):
    out = np.empty(len(x_abs), dtype=np.float64)
    env = 0.0
    for i, v in enumerate(np.asarray(x_abs, dtype=np.float64).tolist()):
        a = attack if v > env else release
        env = a * env + (1.0 - a) * v
        out[i] = env
    return out


def sos_filter(sos, x):
    sos = np.asarray(sos, dtype=np.float64)
    sos = sos / sos[:, 3:4]
    return signal.sosfilt(sos, np.asarray(x, dtype=np.float64))


def sinc_resample(x, step, n_out, cutoff, half_width, chunk=4096):
    x = np.asarray(x, dtype=np.float64)
    n_in = len(x)
    out = np.zeros(n_out, dtype=np.float64)
    offsets = np.arange(-half_width + 1, half_width + 1)
    for start in range(0, n_out, chunk):
        p = np.arange(start, min(start + chunk, n_out)) * step
        k = np.floor(p).astype(np.int64)[:, None] + offsets[None, :]
        t = p[:, None] - k
        valid = (k >= 0) & (k < n_in) & (np.abs(t) < half_width)
        w = 0.5 * (1.0 + np.cos(np.pi * t / half_width))
        h = cutoff * np.sinc(cutoff * t) * w
        taps = np.where(valid, x[np.clip(k, 0, n_in - 1)], 0.0)
        out[start:start + len(p)] = np.sum(taps * h, axis=1)
    return out


def phase_vocoder(mag, phase, time_steps, advance):
    mag = np.asarray(mag, dtype=np.float64)
    phase = np.asarray(phase, dtype=np.float64)
    n_frames = mag.shape[0]
    out = np.empty((len(time_steps), mag.shape[1]), dtype=np.complex128)
    acc = phase[0].copy()
    two_pi = 2.0 * np.pi
    for t, step in enumerate(time_steps):
        i0 = min(int(np.floor(step)), n_frames - 2)
        alpha = min(step - i0, 1.0)
        m = (1.0 - alpha) * mag[i0] + alpha * mag[i0 + 1]
        out[t] = m * np.cos(acc) + 1j * (m * np.sin(acc))
        d = phase[i0 + 1] - phase[i0] - advance
        d = d - two_pi * np.round(d / two_pi)
        acc = acc + advance + d
    return out
