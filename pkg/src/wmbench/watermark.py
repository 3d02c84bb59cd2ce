"""Reference multi-bit watermark in the STFT magnitude.

Each bit owns one sub-band, split into a lower and an upper half with a few
guard bins between them. Bit 1 makes the lower half louder than the upper
half, bit 0 the reverse. Phases are never touched.

The default ``informed`` scheme looks at the host before embedding: for every
bit it searches for the smallest log-gain tilt between the halves that keeps
the detection statistic above ``margin`` over every window of
``window_fraction`` of the frames, checked on four frame-grid offsets so a
trimmed copy analysed on a shifted grid still decodes. The tilts form one
real gain curve (log-linear ramps across guard bins) applied to the spectrum
of the whole signal, i.e. a zero-phase time-invariant filter. A few
re-analysis passes top up bits that fall short after synthesis.

The ``fixed`` scheme is the plain patchwork rule, scaling the halves by
``1 +/- strength_alpha`` in every frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .audio import DEFAULT_SAMPLE_RATE, StftConfig, Waveform, istft, stft
from .errors import LengthMismatch, TooShort, WatermarkLowEnergy

EPS = 1e-12
MIN_DURATION_S = 0.5
MIN_RMS = 1e-4
_MAX_LOG_GAIN = 6.0  # about 52 dB either way, bounds the tilt on near-empty bands
_BISECT_STEPS = 30
_OVERSHOOT = 1.05


@dataclass(frozen=True)
class Message:
    bits: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(v) for v in self.bits)
        if not b:
            raise ValueError("message needs at least one bit")
        if any(v not in (0, 1) for v in b):
            raise ValueError("message bits must be 0 or 1")
        object.__setattr__(self, "bits", b)

    def __len__(self):
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    @classmethod
    def from_hex(cls, text: str, n_bits: int | None = None) -> "Message":
        """Big-endian hex, most significant bit first (``"a5f0"`` -> 1010 0101 ...)."""
        text = text.strip().lower()
        if text.startswith("0x"):
            text = text[2:]
        if not text or any(c not in "0123456789abcdef" for c in text):
            raise ValueError(f"not a hex message: {text!r}")
        bits = tuple(int(b) for c in text for b in format(int(c, 16), "04b"))
        if n_bits is not None:
            if n_bits > len(bits) or any(bits[: len(bits) - n_bits]):
                raise ValueError(f"hex message {text!r} does not fit in {n_bits} bits")
            bits = bits[len(bits) - n_bits:]
        return cls(bits)

    def to_hex(self) -> str:
        n = len(self.bits)
        pad = (-n) % 4
        padded = (0,) * pad + self.bits
        return "".join(format(int("".join(map(str, padded[i:i + 4])), 2), "x")
                       for i in range(0, len(padded), 4))

    @classmethod
    def random(cls, rng: np.random.Generator, n_bits: int = 16) -> "Message":
        return cls(tuple(rng.integers(0, 2, n_bits)))

    def complement(self) -> "Message":
        return Message(tuple(1 - b for b in self.bits))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.bits, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class BitScores:
    """Per-bit scores; positive favours bit 1."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("bit scores must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)

    def hard_bits(self) -> Message:
        return Message(tuple((self.values > 0).astype(int)))


@dataclass(frozen=True)
class WatermarkConfig:
    n_bits: int = 16
    scheme: str = "informed"
    low_hz: float = 3500.0
    high_hz: float = 7000.0
    guard_bins: int = 2
    margin: float = 0.06
    window_fraction: float = 0.25
    max_passes: int = 6
    strength_alpha: float = 0.20
    stft: StftConfig = field(default_factory=StftConfig)

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError("n_bits must be >= 1")
        if self.scheme not in ("informed", "fixed"):
            raise ValueError(f"scheme must be 'informed' or 'fixed', got {self.scheme!r}")
        if not 300.0 <= self.low_hz < self.high_hz <= 7000.0:
            raise ValueError("band range must lie within [300, 7000] Hz")
        if self.guard_bins < 0:
            raise ValueError("guard_bins must be >= 0")
        if not 0.0 < self.margin < 1.0:
            raise ValueError("margin must be in (0, 1)")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValueError("window_fraction must be in (0, 1]")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if not 0.0 < self.strength_alpha < 0.5:
            raise ValueError("strength_alpha must be in (0, 0.5)")
        band_plan(self)  # raises if the bands come out too narrow


@lru_cache(maxsize=32)
def _plan(n_bits, low_hz, high_hz, guard, fft_size, sample_rate):
    k0 = int(np.ceil(low_hz * fft_size / sample_rate))
    k1 = int(np.floor(high_hz * fft_size / sample_rate))
    edges = np.linspace(k0, k1 + 1, n_bits + 1).astype(int)
    plan = []
    for l in range(n_bits):
        band = np.arange(edges[l], edges[l + 1])
        # a guard after the band and one between the halves
        half = (len(band) - 2 * guard) // 2
        if half < 2 or len(band) < 4:
            raise ValueError(f"band {l} is too narrow ({len(band)} bins) for {n_bits} bits")
        lower = band[:half]
        upper = band[half + guard:2 * half + guard]
        lower.setflags(write=False)
        upper.setflags(write=False)
        plan.append((lower, upper))
    return tuple(plan)


def band_plan(cfg: WatermarkConfig, sample_rate: int = DEFAULT_SAMPLE_RATE):
    """Tuple of ``(lower_bins, upper_bins)`` index arrays, one pair per bit."""
    return _plan(cfg.n_bits, cfg.low_hz, cfg.high_hz, cfg.guard_bins,
                 cfg.stft.fft_size, sample_rate)


def _half_energies(power: np.ndarray, plan) -> tuple[np.ndarray, np.ndarray]:
    lower = np.stack([power[:, lo].sum(axis=1) for lo, _ in plan])
    upper = np.stack([power[:, up].sum(axis=1) for _, up in plan])
    return lower, upper  # (n_bits, n_frames)


def _check_embed_input(w: Waveform, m: Message, cfg: WatermarkConfig):
    if w.sample_rate != DEFAULT_SAMPLE_RATE:
        raise ValueError(f"watermark expects {DEFAULT_SAMPLE_RATE} Hz audio, got {w.sample_rate}")
    if len(m) != cfg.n_bits:
        raise LengthMismatch(f"message has {len(m)} bits, config expects {cfg.n_bits}")
    if w.duration < MIN_DURATION_S:
        raise TooShort(f"need at least {MIN_DURATION_S} s, got {w.duration:.3f} s")
    if w.rms() < MIN_RMS:
        raise WatermarkLowEnergy(f"RMS {w.rms():.2e} below {MIN_RMS:.0e}")


def _min_window_mean(d: np.ndarray, win: int) -> float:
    if len(d) <= win:
        return float(d.mean())
    c = np.concatenate(([0.0], np.cumsum(d)))
    return float(np.min((c[win:] - c[:-win]) / win))


def _needed_tilt(views, margin: float) -> float:
    """Smallest log-amplitude tilt bringing every window mean above ``margin``."""
    def worst(shift):
        return min(_min_window_mean(np.tanh(z + shift), win) for z, win in views)

    if worst(0.0) >= margin:
        return 0.0
    lo, hi = 0.0, 2 * _MAX_LOG_GAIN
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if worst(mid) >= margin:
            hi = mid
        else:
            lo = mid
    return hi * _OVERSHOOT


def _embed_informed(w: Waveform, bits: np.ndarray, cfg: WatermarkConfig) -> np.ndarray:
    plan = band_plan(cfg, w.sample_rate)
    hop = cfg.stft.hop
    offsets = sorted({0, hop // 4, hop // 2, 3 * hop // 4})

    key_bins = np.concatenate([np.concatenate(p) for p in plan])
    sizes = [(len(lo), len(up)) for lo, up in plan]
    starts = np.cumsum([0] + [a + b for a, b in sizes])
    key_gain = np.zeros(len(key_bins))  # log gain at the half-band bins
    anchor_bins = np.concatenate(([key_bins[0] - cfg.guard_bins - 1], key_bins,
                                  [key_bins[-1] + cfg.guard_bins + 1]))
    x0, bin_pos, pad = _long_spectrum(w.samples, cfg.stft.fft_size)

    y = w.samples
    for _ in range(cfg.max_passes + 1):
        views_per_offset = []
        for off in offsets:
            if len(y) - off < hop:
                continue
            power = np.abs(stft(Waveform(y[off:], w.sample_rate), cfg.stft).frames) ** 2
            views_per_offset.append(_half_energies(power, plan))
        changed = False
        for l, bit in enumerate(bits):
            views = []
            e_good = e_bad = 0.0
            for lower, upper in views_per_offset:
                good, bad = (lower[l], upper[l]) if bit else (upper[l], lower[l])
                z = 0.5 * np.log((good + EPS) / (bad + EPS))
                views.append((z, max(1, int(cfg.window_fraction * len(z)))))
                e_good += good.sum()
                e_bad += bad.sum()
            tilt = _needed_tilt(views, cfg.margin)
            if tilt == 0.0:
                continue
            changed = True
            # split the tilt so the louder half moves least
            up_share = tilt * (e_bad + EPS) / (e_good + e_bad + 2 * EPS)
            a = starts[l]
            n_lo, n_up = sizes[l]
            lo_idx = np.arange(a, a + n_lo)
            up_idx = np.arange(a + n_lo, a + n_lo + n_up)
            good_idx, bad_idx = (lo_idx, up_idx) if bit else (up_idx, lo_idx)
            key_gain[good_idx] += up_share
            key_gain[bad_idx] -= tilt - up_share
        if not changed or _ == cfg.max_passes:
            break
        np.clip(key_gain, -_MAX_LOG_GAIN, _MAX_LOG_GAIN, out=key_gain)
        log_gain = np.interp(bin_pos, anchor_bins, np.concatenate(([0.0], key_gain, [0.0])))
        y = np.fft.irfft(x0 * np.exp(log_gain), n=len(w) + 2 * pad)[pad:pad + len(w)]
    return y


def _long_spectrum(x: np.ndarray, fft_size: int):
    """Spectrum of the zero-padded whole signal and its frequencies in STFT-bin units.

    Gains are applied here rather than frame by frame: a real gain curve on
    the long spectrum is a zero-phase time-invariant filter, so any re-framing
    of the output (a trimmed copy, say) sees the same tilt.
    """
    pad = 4 * fft_size
    n = len(x) + 2 * pad
    spectrum = np.fft.rfft(np.pad(x, pad), n=n)
    bin_pos = np.arange(len(spectrum)) * fft_size / n
    return spectrum, bin_pos, pad


def _embed_fixed(w: Waveform, bits: np.ndarray, cfg: WatermarkConfig) -> np.ndarray:
    spec = stft(w, cfg.stft)
    gain = np.ones(cfg.stft.n_bins)
    a = cfg.strength_alpha
    for (lo, up), bit in zip(band_plan(cfg, w.sample_rate), bits):
        gain[lo] = 1 + a if bit else 1 - a
        gain[up] = 1 - a if bit else 1 + a
    return istft(spec.with_frames(spec.frames * gain[None, :])).samples


def embed(w: Waveform, m: Message, cfg: WatermarkConfig | None = None) -> Waveform:
    """Watermarked copy of ``w`` carrying ``m``; same length, clamped to [-1, 1]."""
    cfg = cfg or WatermarkConfig()
    _check_embed_input(w, m, cfg)
    bits = m.as_array()
    if cfg.scheme == "fixed":
        y = _embed_fixed(w, bits, cfg)
    else:
        y = _embed_informed(w, bits, cfg)
    return Waveform(np.clip(y, -1.0, 1.0), w.sample_rate)


def detect_bits(w: Waveform, cfg: WatermarkConfig | None = None) -> BitScores:
    """Mean over frames of (E_lower - E_upper) / (E_lower + E_upper + eps) per bit."""
    cfg = cfg or WatermarkConfig()
    if w.sample_rate != DEFAULT_SAMPLE_RATE:
        raise ValueError(f"watermark expects {DEFAULT_SAMPLE_RATE} Hz audio, got {w.sample_rate}")
    if len(w) == 0:
        return BitScores(np.zeros(cfg.n_bits))
    power = np.abs(stft(w, cfg.stft).frames) ** 2
    lower, upper = _half_energies(power, band_plan(cfg, w.sample_rate))
    return BitScores(np.mean((lower - upper) / (lower + upper + EPS), axis=1))


def bit_accuracy(detected: BitScores | Sequence[float], truth: Message) -> float:
    values = detected.values if isinstance(detected, BitScores) else np.asarray(detected, float)
    if len(values) != len(truth):
        raise LengthMismatch(f"{len(values)} scores for a {len(truth)}-bit message")
    return float(np.mean((values > 0) == (truth.as_array() == 1)))
