"""Waveform container, RIFF/WAVE PCM I/O, STFT/iSTFT and resampling."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import get_window

from . import kernels
from .errors import CorruptHeader, EmptyInput, InconsistentShape, IoFailure, UnsupportedFormat

DEFAULT_SAMPLE_RATE = 16000

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono PCM signal. ``samples`` is stored as a read-only float64 array."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise ValueError("waveform samples must be finite")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def rms(self) -> float:
        if len(self.samples) == 0:
            return 0.0
        return float(np.sqrt(np.mean(self.samples**2)))

    def peak(self) -> float:
        if len(self.samples) == 0:
            return 0.0
        return float(np.max(np.abs(self.samples)))

    def replace(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate)


def require_content(w: Waveform, what: str = "waveform") -> None:
    if len(w) == 0:
        raise EmptyInput(f"{what} is empty")


# ---------------------------------------------------------------------------
# RIFF/WAVE


def read_pcm(path) -> Waveform:
    """Read a linear-PCM or IEEE-float WAVE file; multichannel input keeps channel 0.

    Integer samples are normalised by ``2**(bits - 1)``.
    """
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        ckid = data[pos:pos + 4]
        size = struct.unpack_from("<I", data, pos + 4)[0]
        body = data[pos + 8:pos + 8 + size]
        if ckid == b"fmt ":
            if len(body) < 16:
                raise CorruptHeader(f"{path}: truncated fmt chunk")
            fmt = body
        elif ckid == b"data":
            payload = body
            if fmt is not None:
                break
        pos += 8 + size + (size & 1)
    if fmt is None or payload is None:
        raise CorruptHeader(f"{path}: missing fmt or data chunk")

    tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", fmt, 0)
    if tag == _WAVE_FORMAT_EXTENSIBLE:
        if len(fmt) < 26:
            raise CorruptHeader(f"{path}: truncated extensible fmt chunk")
        tag = struct.unpack_from("<H", fmt, 24)[0]
    if channels < 1 or rate < 1 or bits == 0:
        raise CorruptHeader(f"{path}: invalid fmt fields")
    if channels > 2:
        raise UnsupportedFormat(f"{path}: {channels}-channel layouts are not supported")

    if tag == _WAVE_FORMAT_PCM and bits in (8, 16, 24, 32):
        width = bits // 8
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits in (32, 64):
        width = bits // 8
    else:
        raise UnsupportedFormat(f"{path}: format tag {tag:#06x} with {bits} bits")
    if block_align != width * channels:
        raise CorruptHeader(f"{path}: block_align {block_align} inconsistent with format")

    n_frames = len(payload) // block_align
    raw = payload[: n_frames * block_align]
    if tag == _WAVE_FORMAT_IEEE_FLOAT:
        x = np.frombuffer(raw, dtype="<f4" if bits == 32 else "<f8").astype(np.float64)
    elif bits == 8:
        x = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        x = v.astype(np.float64) / float(1 << 23)
    else:
        x = np.frombuffer(raw, dtype="<i2" if bits == 16 else "<i4").astype(np.float64)
        x /= float(1 << (bits - 1))
    x = x.reshape(n_frames, channels)[:, 0]
    if not np.all(np.isfinite(x)):
        raise CorruptHeader(f"{path}: non-finite float samples")
    return Waveform(x, rate)


def write_pcm(w: Waveform, path, bit_depth=16) -> None:
    """Write ``w`` as mono WAVE; ``bit_depth`` is 16 (int) or 32 (float).

    The 16-bit path clamps to ``[-1, 32767/32768]`` and rounds to nearest.
    """
    if bit_depth in (16, "16"):
        q = np.clip(w.samples, -1.0, 32767.0 / 32768.0) * 32768.0
        raw = np.round(q).astype("<i2").tobytes()
        tag, bits = _WAVE_FORMAT_PCM, 16
    elif bit_depth in (32, "32", "32f", "32-float", "float"):
        raw = w.samples.astype("<f4").tobytes()
        tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise UnsupportedFormat(f"bit_depth must be 16 or 32-float, got {bit_depth!r}")
    block = bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(raw)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, tag, 1, w.sample_rate,
                                    w.sample_rate * block, block, bits)
    header += b"data" + struct.pack("<I", len(raw))
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(raw)
            if len(raw) & 1:
                fh.write(b"\x00")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# STFT


def _make_window(name: str, n: int) -> np.ndarray:
    return get_window(name, n, fftbins=True).astype(np.float64)


def is_cola(window: np.ndarray, hop: int, tol: float = 1e-10) -> bool:
    """True when shifted copies of ``window`` at ``hop`` sum to a constant."""
    n = len(window)
    folded = np.zeros(hop)
    for start in range(0, n, hop):
        seg = window[start:start + hop]
        folded[: len(seg)] += seg
    return bool(np.ptp(folded) <= tol * max(np.max(np.abs(folded)), 1e-300))


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 1024
    hop: int = 512
    window: str = "hann"

    def __post_init__(self):
        if self.fft_size <= 0 or self.fft_size % 2:
            raise ValueError(f"fft_size must be a positive even integer, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ValueError(f"hop must be in (0, fft_size], got {self.hop}")
        try:
            win = _make_window(self.window, self.fft_size)
        except ValueError as exc:
            raise ValueError(f"unknown window {self.window!r}") from exc
        if not is_cola(win, self.hop):
            raise ValueError(f"window {self.window!r} is not COLA at hop {self.hop}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    def window_array(self) -> np.ndarray:
        return _make_window(self.window, self.fft_size)

    def frames_for(self, length: int) -> int:
        """Frames needed so that a frame is centred at or after the last sample."""
        return 1 + -(-(length - 1) // self.hop)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    frames: np.ndarray  # (num_frames, fft_size // 2 + 1) complex
    config: StftConfig = field(default_factory=StftConfig)
    original_length: int = 0
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        f = np.asarray(self.frames)
        if f.ndim != 2 or f.shape[1] != self.config.n_bins:
            raise InconsistentShape(
                f"frames must be (num_frames, {self.config.n_bins}), got {f.shape}")
        if self.original_length < 1:
            raise InconsistentShape("original_length must be positive")
        if f.shape[0] < self.config.frames_for(self.original_length):
            raise InconsistentShape(
                f"{f.shape[0]} frames cannot cover {self.original_length} samples "
                f"at hop {self.config.hop}")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def with_frames(self, frames, original_length=None) -> "Spectrogram":
        return Spectrogram(np.asarray(frames), self.config,
                           self.original_length if original_length is None else original_length,
                           self.sample_rate)


def reflect_pad(x: np.ndarray, left: int, right: int) -> np.ndarray:
    # np.pad's reflect mode needs len(x) > pad; repeat reflection for short inputs
    while left or right:
        lim = max(len(x) - 1, 0)
        l_step, r_step = min(left, lim), min(right, lim)
        if lim == 0:
            return np.pad(x, (left, right), mode="edge")
        x = np.pad(x, (l_step, r_step), mode="reflect")
        left -= l_step
        right -= r_step
    return x


def stft(w: Waveform, cfg: StftConfig | None = None) -> Spectrogram:
    """Centred STFT with reflective padding."""
    cfg = cfg or StftConfig()
    require_content(w)
    x = w.samples
    n = len(x)
    half = cfg.fft_size // 2
    n_frames = cfg.frames_for(n)
    right = (n_frames - 1) * cfg.hop + cfg.fft_size - half - n
    padded = reflect_pad(x, half, right)
    idx = np.arange(cfg.fft_size)[None, :] + cfg.hop * np.arange(n_frames)[:, None]
    frames = np.fft.rfft(padded[idx] * cfg.window_array()[None, :], axis=1)
    return Spectrogram(frames, cfg, n, w.sample_rate)


def istft(s: Spectrogram) -> Waveform:
    """Weighted overlap-add inverse of :func:`stft`, cut to ``original_length``."""
    cfg = s.config
    frames = np.asarray(s.frames)
    if frames.ndim != 2 or frames.shape[1] != cfg.n_bins:
        raise InconsistentShape(f"bad spectrogram shape {frames.shape}")
    win = cfg.window_array()
    n_frames = frames.shape[0]
    total = (n_frames - 1) * cfg.hop + cfg.fft_size
    seg = np.fft.irfft(frames, n=cfg.fft_size, axis=1) * win[None, :]
    out = np.zeros(total)
    norm = np.zeros(total)
    w2 = win**2
    for t in range(n_frames):
        a = t * cfg.hop
        out[a:a + cfg.fft_size] += seg[t]
        norm[a:a + cfg.fft_size] += w2
    half = cfg.fft_size // 2
    out = out[half:half + s.original_length]
    norm = norm[half:half + s.original_length]
    if len(out) < s.original_length:
        raise InconsistentShape("spectrogram too short for original_length")
    nz = norm > 1e-10
    out[nz] /= norm[nz]
    out[~nz] = 0.0
    return Waveform(out, s.sample_rate)


# ---------------------------------------------------------------------------
# resampling

RESAMPLE_HALF_WIDTH = 32  # 64-tap windowed-sinc kernel


def resample_array(x: np.ndarray, source_rate: float, target_rate: float,
                   n_out: int | None = None) -> np.ndarray:
    """Band-limited resampling between arbitrary (possibly fractional) rates."""
    if source_rate <= 0 or target_rate <= 0:
        raise ValueError("sample rates must be positive")
    x = np.ascontiguousarray(x, dtype=np.float64)
    if n_out is None:
        n_out = int(round(len(x) * target_rate / source_rate))
    if source_rate == target_rate and n_out == len(x):
        return x.copy()
    step = source_rate / target_rate
    cutoff = min(1.0, target_rate / source_rate)
    return kernels.sinc_resample(x, float(step), int(n_out), float(cutoff), RESAMPLE_HALF_WIDTH)


def resample(w: Waveform, target_rate_hz: int) -> Waveform:
    if target_rate_hz <= 0 or int(target_rate_hz) != target_rate_hz:
        raise ValueError(f"target_rate_hz must be a positive integer, got {target_rate_hz!r}")
    if target_rate_hz == w.sample_rate:
        return w
    y = resample_array(w.samples, w.sample_rate, target_rate_hz)
    return Waveform(y, int(target_rate_hz))


def snr_db(reference: np.ndarray, test: np.ndarray) -> float:
    """10*log10(P_ref / P_(test - ref))."""
    noise = np.asarray(test, dtype=np.float64) - reference
    p_n = float(np.mean(noise**2))
    p_s = float(np.mean(np.asarray(reference, dtype=np.float64) ** 2))
    if p_n == 0.0:
        return math.inf
    return 10.0 * math.log10(p_s / p_n)
