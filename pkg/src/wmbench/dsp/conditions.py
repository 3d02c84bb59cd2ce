"""Condition catalogue, per-trial parameter sampling and dispatch.

Parameters are drawn once per (condition, utterance) from a stream seeded by
hashing the master seed with both ids, stored as plain JSON values, and then
applied by :func:`apply_with_params`. Replaying stored parameters reproduces
the output without touching the random stream.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..audio import DEFAULT_SAMPLE_RATE, StftConfig, Waveform, read_pcm, require_content, resample
from ..errors import RangeViolation, SkippedCondition, TooShort
from . import dynamics, external, noise, spectral, timescale


class ConditionKind(str, enum.Enum):
    NONE = "None"
    GAUSSIAN_NOISE = "GaussianNoise"
    MUSAN = "Musan"
    RIR = "Rir"
    QUANTIZATION = "Quantization"
    COMPRESSOR = "Compressor"
    OPUS = "Opus"
    DAC = "Dac"
    WAVTOKENIZER = "WavTokenizer"
    CLIPPING = "Clipping"
    OVERDRIVE = "Overdrive"
    RANDOM_TRIMMING = "RandomTrimming"
    EQUALIZER = "Equalizer"
    FREQUENCY_MASKING = "FrequencyMasking"
    NOISE_GATE = "NoiseGate"
    NOISE_REDUCTION = "NoiseReduction"
    TIME_STRETCH = "TimeStretch"
    PITCH_SHIFT = "PitchShift"

    @classmethod
    def parse(cls, name: str) -> "ConditionKind":
        key = name.replace("_", "").replace("-", "").replace(" ", "").lower()
        for k in cls:
            if k.value.lower() == key:
                return k
        raise ValueError(f"unknown condition {name!r}")

    @property
    def group(self) -> "Group":
        return GROUP[self]

    @property
    def display_name(self) -> str:
        return DISPLAY_NAME[self]


class Group(str, enum.Enum):
    NONE = "None"
    TRANSMISSION = "Transmission"
    MANIPULATION = "Manipulation"


class Category(str, enum.Enum):
    NOT_APPLIED = "NotApplied"
    PARTIALLY_SEEN = "PartiallySeen"
    UNSEEN = "Unseen"


K = ConditionKind

TRANSMISSION = (K.GAUSSIAN_NOISE, K.MUSAN, K.RIR, K.QUANTIZATION, K.COMPRESSOR,
                K.OPUS, K.DAC, K.WAVTOKENIZER)
MANIPULATION = (K.CLIPPING, K.OVERDRIVE, K.RANDOM_TRIMMING, K.EQUALIZER,
                K.FREQUENCY_MASKING, K.NOISE_GATE, K.NOISE_REDUCTION,
                K.TIME_STRETCH, K.PITCH_SHIFT)
ALL_CONDITIONS = (K.NONE,) + TRANSMISSION + MANIPULATION

GROUP = {K.NONE: Group.NONE}
GROUP.update({k: Group.TRANSMISSION for k in TRANSMISSION})
GROUP.update({k: Group.MANIPULATION for k in MANIPULATION})

# conditions that at least one of the reference study's systems saw in training
DEFAULT_PARTIALLY_SEEN = frozenset({K.GAUSSIAN_NOISE, K.DAC, K.WAVTOKENIZER,
                                    K.RANDOM_TRIMMING, K.TIME_STRETCH, K.PITCH_SHIFT})

DISPLAY_NAME = {
    K.NONE: "None",
    K.GAUSSIAN_NOISE: "Gaussian noise",
    K.MUSAN: "MUSAN",
    K.RIR: "RIR",
    K.QUANTIZATION: "Quantization",
    K.COMPRESSOR: "Compressor",
    K.OPUS: "Opus",
    K.DAC: "DAC",
    K.WAVTOKENIZER: "WavTokenizer",
    K.CLIPPING: "Clipping",
    K.OVERDRIVE: "Overdrive",
    K.RANDOM_TRIMMING: "Random trimming",
    K.EQUALIZER: "Equalizer",
    K.FREQUENCY_MASKING: "Frequency masking",
    K.NOISE_GATE: "Noise gate",
    K.NOISE_REDUCTION: "Noise reduction",
    K.TIME_STRETCH: "Time stretch",
    K.PITCH_SHIFT: "Pitch shift",
}

TOOL_CONDITIONS = frozenset({K.OPUS, K.DAC, K.WAVTOKENIZER, K.NOISE_REDUCTION})

GAUSSIAN_SNRS = (5.0, 10.0, 15.0)
MUSAN_SNR = 10.0
OPUS_BITRATES = (1, 2, 4, 8, 16, 31)
THRESHOLD_RANGE = (-50.0, -10.0)
RATIO_RANGE = (2.0, 10.0)
GAIN_RANGE = (0.0, 50.0)
COLOUR_RANGE = (0.0, 50.0)
EQ_GAIN_RANGE = (-12.0, 12.0)
RT60_RANGE = (0.2, 0.8)


def default_category(kind: ConditionKind) -> Category:
    if kind is K.NONE:
        return Category.NOT_APPLIED
    return Category.PARTIALLY_SEEN if kind in DEFAULT_PARTIALLY_SEEN else Category.UNSEEN


@dataclass(frozen=True)
class TrialSeed:
    master_seed: int
    condition_id: str
    utterance_id: str

    def stream_seed(self) -> int:
        text = f"{int(self.master_seed)}\x1f{self.condition_id}\x1f{self.utterance_id}"
        return int.from_bytes(hashlib.sha256(text.encode()).digest()[:16], "little")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.stream_seed())


@dataclass(frozen=True)
class Resources:
    """Optional corpora and tool bindings. Unset corpora use synthetic stand-ins."""

    musan_dir: Path | None = None
    rir_dir: Path | None = None
    tools: Mapping[ConditionKind, external.ToolSpec] = field(default_factory=dict)
    audio_ext: str = ".wav"

    def corpus_files(self, which: str) -> list[Path]:
        root = self.musan_dir if which == "musan" else self.rir_dir
        if root is None:
            return []
        return _list_corpus(Path(root), self.audio_ext)


_CORPUS_CACHE: dict[tuple[str, str], list[Path]] = {}


def _list_corpus(root: Path, ext: str) -> list[Path]:
    key = (str(root), ext)
    if key not in _CORPUS_CACHE:
        if not root.is_dir():
            raise SkippedCondition(f"corpus directory not found: {root}")
        _CORPUS_CACHE[key] = sorted(p for p in root.rglob(f"*{ext}") if p.is_file())
    return _CORPUS_CACHE[key]


def _corpus_pick(rng, files: list[Path], root: Path | None) -> str:
    if root is None:
        return "synthetic"
    if not files:
        raise SkippedCondition(f"no audio files under {root}")
    return str(files[int(rng.integers(0, len(files)))].relative_to(root))


def _load_corpus_clip(root: Path, rel: str) -> Waveform:
    w = read_pcm(Path(root) / rel)
    if w.sample_rate != DEFAULT_SAMPLE_RATE:
        w = resample(w, DEFAULT_SAMPLE_RATE)
    return w


def sample_params(kind: ConditionKind, rng: np.random.Generator, n_samples: int,
                  resources: Resources | None = None,
                  stft_cfg: StftConfig | None = None) -> dict[str, Any]:
    """Draw the free parameters of ``kind`` for one trial."""
    res = resources or Resources()
    cfg = stft_cfg or StftConfig()
    u = lambda lo_hi: float(rng.uniform(*lo_hi))  # noqa: E731
    seed = lambda: int(rng.integers(0, 2**63 - 1))  # noqa: E731

    if kind is K.NONE or kind in (K.DAC, K.WAVTOKENIZER, K.NOISE_REDUCTION, K.NOISE_GATE):
        return {}
    if kind is K.GAUSSIAN_NOISE:
        return {"snr_db": float(rng.choice(GAUSSIAN_SNRS)), "noise_seed": seed()}
    if kind is K.MUSAN:
        return {"snr_db": MUSAN_SNR, "clip": _corpus_pick(rng, res.corpus_files("musan"), res.musan_dir),
                "noise_seed": seed()}
    if kind is K.RIR:
        return {"rir": _corpus_pick(rng, res.corpus_files("rir"), res.rir_dir),
                "rt60": u(RT60_RANGE), "rir_seed": seed()}
    if kind is K.QUANTIZATION:
        return {"bits": int(rng.choice(dynamics.QUANT_BITS))}
    if kind is K.COMPRESSOR:
        return {"threshold_db": u(THRESHOLD_RANGE), "ratio": u(RATIO_RANGE)}
    if kind is K.OPUS:
        return {"bitrate_kbps": int(rng.choice(OPUS_BITRATES))}
    if kind is K.CLIPPING:
        return {"lo_pct": 1.0, "hi_pct": 99.0}
    if kind is K.OVERDRIVE:
        return {"gain_db": u(GAIN_RANGE), "colour": u(COLOUR_RANGE)}
    if kind is K.RANDOM_TRIMMING:
        start, end = timescale.trim_bounds(rng, n_samples)
        return {"start": start, "end": end}
    if kind is K.EQUALIZER:
        return {"gains_db": [u(EQ_GAIN_RANGE) for _ in spectral.EQ_CENTERS_HZ]}
    if kind is K.FREQUENCY_MASKING:
        n = int(rng.integers(spectral.MASK_MIN_BINS, spectral.MASK_MAX_BINS + 1))
        return {"bins": spectral.choose_mask_bins(rng, n, cfg.n_bins)}
    if kind is K.TIME_STRETCH:
        return {"rate": u(timescale.STRETCH_RANGE)}
    if kind is K.PITCH_SHIFT:
        return {"semitones": u(timescale.PITCH_RANGE)}
    raise ValueError(f"unhandled condition {kind}")


def _in(x, lo_hi, name):
    if not lo_hi[0] <= x <= lo_hi[1]:
        raise RangeViolation(f"{name}={x} outside [{lo_hi[0]}, {lo_hi[1]}]")


def check_params(kind: ConditionKind, p: Mapping[str, Any], n_samples: int) -> None:
    """Assert that stored parameters fall in the prescribed ranges."""
    if kind is K.GAUSSIAN_NOISE and p["snr_db"] not in GAUSSIAN_SNRS:
        raise RangeViolation(f"snr_db={p['snr_db']} not in {GAUSSIAN_SNRS}")
    if kind is K.MUSAN and p["snr_db"] != MUSAN_SNR:
        raise RangeViolation(f"MUSAN snr_db must be {MUSAN_SNR}")
    if kind is K.RIR:
        _in(p["rt60"], RT60_RANGE, "rt60")
    if kind is K.QUANTIZATION and p["bits"] not in dynamics.QUANT_BITS:
        raise RangeViolation(f"bits={p['bits']} not in {dynamics.QUANT_BITS}")
    if kind is K.COMPRESSOR:
        _in(p["threshold_db"], THRESHOLD_RANGE, "threshold_db")
        _in(p["ratio"], RATIO_RANGE, "ratio")
    if kind is K.OPUS and p["bitrate_kbps"] not in OPUS_BITRATES:
        raise RangeViolation(f"bitrate {p['bitrate_kbps']} not in {OPUS_BITRATES}")
    if kind is K.OVERDRIVE:
        _in(p["gain_db"], GAIN_RANGE, "gain_db")
        _in(p["colour"], COLOUR_RANGE, "colour")
    if kind is K.RANDOM_TRIMMING:
        _in(p["start"], (0, n_samples // 4), "start")
        _in(p["end"], (-(-3 * n_samples // 4), n_samples), "end")
    if kind is K.EQUALIZER:
        if len(p["gains_db"]) != len(spectral.EQ_CENTERS_HZ):
            raise RangeViolation("equalizer needs 7 gains")
        for g in p["gains_db"]:
            _in(g, EQ_GAIN_RANGE, "gain_db")
    if kind is K.FREQUENCY_MASKING:
        _in(len(set(p["bins"])), (spectral.MASK_MIN_BINS, spectral.MASK_MAX_BINS), "n_bins")
    if kind is K.TIME_STRETCH:
        _in(p["rate"], timescale.STRETCH_RANGE, "rate")
    if kind is K.PITCH_SHIFT:
        _in(p["semitones"], timescale.PITCH_RANGE, "semitones")


def apply_with_params(kind: ConditionKind, w: Waveform, params: Mapping[str, Any],
                      resources: Resources | None = None,
                      stft_cfg: StftConfig | None = None) -> Waveform:
    """Apply ``kind`` with already-sampled parameters; deterministic."""
    res = resources or Resources()
    require_content(w)
    if w.sample_rate != DEFAULT_SAMPLE_RATE:
        raise ValueError(f"conditions expect {DEFAULT_SAMPLE_RATE} Hz input, got {w.sample_rate}")
    check_params(kind, params, len(w))
    p = params

    if kind is K.NONE:
        return w
    if kind is K.GAUSSIAN_NOISE:
        out = noise.add_noise(w, p["snr_db"], rng=np.random.default_rng(p["noise_seed"]))
    elif kind is K.MUSAN:
        if p["clip"] == "synthetic":
            n = noise.synthetic_noise(np.random.default_rng(p["noise_seed"]), len(w))
        else:
            n = _load_corpus_clip(res.musan_dir, p["clip"]).samples
        out = noise.add_noise(w, p["snr_db"], noise=n)
    elif kind is K.RIR:
        if p["rir"] == "synthetic":
            h = noise.synthetic_rir(np.random.default_rng(p["rir_seed"]), w.sample_rate, p["rt60"])
        else:
            h = _load_corpus_clip(res.rir_dir, p["rir"]).samples
        out = noise.convolve_rir(w, h)
    elif kind is K.QUANTIZATION:
        out = dynamics.quantize(w, p["bits"])
    elif kind is K.COMPRESSOR:
        out = dynamics.compress_dynamics(w, p["threshold_db"], p["ratio"])
    elif kind is K.OPUS:
        out = external.external_condition(w, res.tools.get(kind), [str(p["bitrate_kbps"])])
    elif kind in (K.DAC, K.WAVTOKENIZER, K.NOISE_REDUCTION):
        out = external.external_condition(w, res.tools.get(kind))
    elif kind is K.CLIPPING:
        out = dynamics.clip_percentile(w, p["lo_pct"], p["hi_pct"])
    elif kind is K.OVERDRIVE:
        out = dynamics.overdrive(w, p["gain_db"], p["colour"])
    elif kind is K.RANDOM_TRIMMING:
        out = timescale.trim(w, p["start"], p["end"])
    elif kind is K.EQUALIZER:
        out = spectral.equalize(w, p["gains_db"])
    elif kind is K.FREQUENCY_MASKING:
        out = spectral.mask_frequencies(w, p["bins"], stft_cfg)
    elif kind is K.NOISE_GATE:
        out = spectral.noise_gate(w, stft_cfg)
    elif kind is K.TIME_STRETCH:
        out = timescale.time_stretch(w, p["rate"])
    elif kind is K.PITCH_SHIFT:
        out = timescale.pitch_shift(w, p["semitones"])
    else:
        raise ValueError(f"unhandled condition {kind}")
    return out.replace(noise.bounded(out.samples)[0])


@dataclass(frozen=True)
class ConditionSpec:
    kind: ConditionKind
    resources: Resources = field(default_factory=Resources)

    @property
    def group(self) -> Group:
        return self.kind.group

    @property
    def condition_id(self) -> str:
        return self.kind.value

    def check_resources(self) -> None:
        """Raise :class:`SkippedCondition` when a required binding is absent."""
        if self.kind in TOOL_CONDITIONS:
            tool = self.resources.tools.get(self.kind)
            if tool is None:
                raise SkippedCondition(f"{self.kind.value}: no tool configured")
            if not tool.available():
                raise SkippedCondition(f"{self.kind.value}: tool not found: {tool.command[0]}")


def draw_params(spec: ConditionSpec, w: Waveform, seed: TrialSeed,
                stft_cfg: StftConfig | None = None) -> dict[str, Any]:
    if spec.kind is K.RANDOM_TRIMMING and w.duration < 1.0:
        raise TooShort(f"trimming needs at least 1 s, got {w.duration:.3f} s")
    return sample_params(spec.kind, seed.rng(), len(w), spec.resources, stft_cfg)


def apply_condition(spec: ConditionSpec, w: Waveform, seed: TrialSeed,
                    stft_cfg: StftConfig | None = None) -> Waveform:
    """Sample this trial's parameters from ``seed`` and apply the condition."""
    spec.check_resources()
    params = draw_params(spec, w, seed, stft_cfg)
    return apply_with_params(spec.kind, w, params, spec.resources, stft_cfg)
