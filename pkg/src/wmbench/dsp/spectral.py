"""Equalizer, STFT-bin masking and spectral noise gate."""

from __future__ import annotations

import inspect
import math

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .. import kernels
from ..audio import StftConfig, Waveform, reflect_pad, istft, require_content, stft
from ..errors import RangeViolation

EQ_CENTERS_HZ = (125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 6000.0)
EQ_Q = 1.0

MASK_MIN_BINS = 10
MASK_MAX_BINS = 80
MASK_CG_RTOL = 3e-3  # about -50 dB left in the masked bins
MASK_CG_MAXITER = 500

GATE_QUIET_FRACTION = 0.10
GATE_THRESHOLD_SCALE = 4.0
GATE_ATTENUATION_DB = 40.0
GATE_MIN_RANGE_DB = 6.0

# scipy renamed cg's ``tol`` to ``rtol``
_CG_TOL = "rtol" if "rtol" in inspect.signature(cg).parameters else "tol"


def peaking_biquad(center_hz: float, gain_db: float, q: float, sample_rate: int) -> np.ndarray:
    """Second-order peaking section as an ``sos`` row ``[b0 b1 b2 a0 a1 a2]``."""
    a = 10.0 ** (gain_db / 40.0)
    w0 = 2.0 * math.pi * center_hz / sample_rate
    alpha = math.sin(w0) / (2.0 * q)
    c = math.cos(w0)
    return np.array([1 + alpha * a, -2 * c, 1 - alpha * a,
                     1 + alpha / a, -2 * c, 1 - alpha / a])


def equalize(w: Waveform, gains_db, centers_hz=EQ_CENTERS_HZ, q: float = EQ_Q) -> Waveform:
    gains_db = [float(g) for g in gains_db]
    if len(gains_db) != len(centers_hz):
        raise ValueError(f"need {len(centers_hz)} gains, got {len(gains_db)}")
    # a 0 dB peaking section is exactly the identity, so skip it
    rows = [peaking_biquad(f, g, q, w.sample_rate)
            for f, g in zip(centers_hz, gains_db) if g != 0.0]
    if not rows or len(w) == 0:
        return w
    y = kernels.sos_filter(np.ascontiguousarray(np.stack(rows)), np.ascontiguousarray(w.samples))
    return w.replace(y)


def _masked_bin_operator(n: int, bins: np.ndarray, cfg: StftConfig):
    """Forward map x -> STFT[:, bins] and its real adjoint, padding included."""
    N, hop, half = cfg.fft_size, cfg.hop, cfg.fft_size // 2
    n_frames = cfg.frames_for(n)
    right = (n_frames - 1) * hop + N - half - n
    src = reflect_pad(np.arange(n, dtype=np.float64), half, right).astype(np.int64)
    frame_idx = (np.arange(N)[None, :] + hop * np.arange(n_frames)[:, None]).ravel()
    sample_of = src[frame_idx]  # padded-frame position -> input sample
    win = cfg.window_array()
    basis = np.exp(-2j * np.pi * np.outer(bins, np.arange(N)) / N)  # (K, N)

    def forward(x):
        return (x[sample_of].reshape(n_frames, N) * win) @ basis.T

    def adjoint(c):
        g = np.real(c @ np.conj(basis)) * win
        return np.bincount(sample_of, weights=g.ravel(), minlength=n)

    return forward, adjoint, n_frames


def mask_frequencies(w: Waveform, bins, cfg: StftConfig | None = None) -> Waveform:
    """Remove the given STFT bins from every frame.

    Zeroing rows and resynthesising is not enough on its own: overlap-add
    smears neighbouring bins back in on re-analysis. Instead the output is the
    closest signal (least squares) whose STFT is zero in those bins, found
    with conjugate gradients on the normal equations.
    """
    cfg = cfg or StftConfig()
    bins = np.unique(np.asarray(bins, dtype=np.int64))
    if not MASK_MIN_BINS <= len(bins) <= MASK_MAX_BINS:
        raise RangeViolation(f"need {MASK_MIN_BINS}..{MASK_MAX_BINS} distinct bins, got {len(bins)}")
    if bins[0] < 0 or bins[-1] >= cfg.n_bins:
        raise RangeViolation(f"bin index outside 0..{cfg.n_bins - 1}")
    require_content(w)
    x = w.samples
    if not np.any(x):
        return w
    forward, adjoint, n_frames = _masked_bin_operator(len(x), bins, cfg)
    m = n_frames * len(bins)

    def pack(c):
        return np.concatenate((c.real.ravel(), c.imag.ravel()))

    def unpack(v):
        return (v[:m] + 1j * v[m:]).reshape(n_frames, len(bins))

    op = LinearOperator((2 * m, 2 * m), dtype=np.float64,
                        matvec=lambda v: pack(forward(adjoint(unpack(v)))))
    # the CG residual is exactly what is left in the masked bins
    lam, _ = cg(op, pack(forward(x)), maxiter=MASK_CG_MAXITER, **{_CG_TOL: MASK_CG_RTOL})
    return w.replace(x - adjoint(unpack(lam)))


def choose_mask_bins(rng: np.random.Generator, n_bins: int, n_total: int) -> list[int]:
    if not MASK_MIN_BINS <= n_bins <= MASK_MAX_BINS:
        raise RangeViolation(f"n_bins must be in [{MASK_MIN_BINS}, {MASK_MAX_BINS}], got {n_bins}")
    return sorted(int(b) for b in rng.choice(n_total, size=n_bins, replace=False))


def noise_gate(w: Waveform, cfg: StftConfig | None = None,
               threshold_scale: float = GATE_THRESHOLD_SCALE) -> Waveform:
    """Spectral gate with a per-bin threshold learnt from the quietest frames.

    Signals without a usable quiet/loud contrast (90th vs 10th percentile
    frame RMS under ``GATE_MIN_RANGE_DB``) have no noise-only frames to learn
    from and pass through unchanged.
    """
    cfg = cfg or StftConfig()
    require_content(w)
    if not np.any(w.samples):
        return w
    s = stft(w, cfg)
    mag = np.abs(s.frames)
    frame_rms = np.sqrt(np.mean(mag**2, axis=1))
    p10, p90 = np.percentile(frame_rms, [10, 90])
    if p90 <= 0 or (p10 > 0 and 20 * np.log10(p90 / p10) < GATE_MIN_RANGE_DB):
        return w
    n_quiet = max(1, int(round(GATE_QUIET_FRACTION * len(frame_rms))))
    quiet = np.argsort(frame_rms, kind="stable")[:n_quiet]
    threshold = threshold_scale * np.median(mag[quiet], axis=0)
    floor = 10.0 ** (-GATE_ATTENUATION_DB / 20.0)
    mask = np.where(mag >= threshold[None, :], 1.0, floor)
    # 3-frame raised-cosine smoothing along time
    kern = np.array([0.25, 0.5, 0.25])
    padded = np.concatenate((mask[:1], mask, mask[-1:]), axis=0)
    mask = kern[0] * padded[:-2] + kern[1] * padded[1:-1] + kern[2] * padded[2:]
    return istft(s.with_frames(s.frames * mask))
