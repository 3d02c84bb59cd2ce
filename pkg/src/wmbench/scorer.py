"""Turn system outputs into one higher-is-real score per trial.

Watermark systems read per-bit scores and fuse them against the real/fake
message pair. Passive systems come in through a score file, an external
scoring program, or the built-in spectral-flatness baseline (plumbing only).
"""

from __future__ import annotations

import enum
import math
import subprocess
import tempfile
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .audio import StftConfig, Waveform, stft, write_pcm
from .dsp.conditions import ConditionKind
from .dsp.external import ToolSpec
from .errors import AdapterFailure, LengthMismatch, MissingScore, ParseFailure
from .watermark import BitScores, Message, WatermarkConfig, detect_bits



def sign_q(bit: int) -> int:
    if bit == 1:
        return 1
    if bit == 0:
        return -1
    raise ValueError(f"bit must be 0 or 1, got {bit!r}")


@dataclass(frozen=True)
class MessagePair:
    m_real: Message
    m_fake: Message

    def __post_init__(self):
        if len(self.m_real) != len(self.m_fake):
            raise LengthMismatch(f"message lengths differ: {len(self.m_real)} vs {len(self.m_fake)}")
        shared = self.shared_positions()
        if shared:
            warnings.warn(f"{len(shared)} of {len(self.m_real)} bit positions agree between "
                          "the real and fake messages and cannot contribute to the score",
                          stacklevel=2)

    def __len__(self):
        return len(self.m_real)

    def shared_positions(self) -> list[int]:
        return [i for i, (a, b) in enumerate(zip(self.m_real, self.m_fake)) if a == b]

    @property
    def disjoint(self) -> bool:
        return not self.shared_positions()

    @classmethod
    def random(cls, rng: np.random.Generator, n_bits: int = 16) -> "MessagePair":
        """Random real message and its bit-wise complement as the fake message."""
        m = Message.random(rng, n_bits)
        return cls(m, m.complement())

    def weights(self) -> np.ndarray:
        """Per-bit weight ``q(m_real) - q(m_fake)``, in {-2, 0, 2}."""
        return np.array([sign_q(a) - sign_q(b) for a, b in zip(self.m_real, self.m_fake)],
                        dtype=np.float64)


def fuse_score(bs: BitScores | Sequence[float], pair: MessagePair) -> float:
    """(1/L) * sum_l s_l * (q(m_real,l) - q(m_fake,l)); higher favours real."""
    v = bs.values if isinstance(bs, BitScores) else np.asarray(bs, dtype=np.float64)
    if len(v) != len(pair):
        raise LengthMismatch(f"{len(v)} bit scores for {len(pair)}-bit messages")
    return float(np.dot(v, pair.weights()) / len(pair))


class AdapterKind(str, enum.Enum):
    WATERMARK_REFERENCE = "watermark_reference"
    EXTERNAL_SCORER = "external_scorer"
    SCORE_FILE = "score_file"
    BUILTIN_BASELINE = "builtin_baseline"


class Polarity(str, enum.Enum):
    HIGHER_IS_REAL = "higher_is_real"
    HIGHER_IS_FAKE = "higher_is_fake"

    def orient(self, score: float) -> float:
        return score if self is Polarity.HIGHER_IS_REAL else -score


@dataclass(frozen=True)
class SystemAdapter:
    name: str
    kind: AdapterKind
    polarity: Polarity
    partially_seen: frozenset[ConditionKind] = frozenset()
    message_pair: MessagePair | None = None
    watermark: WatermarkConfig = field(default_factory=WatermarkConfig)
    scores: Mapping[str, float] | None = None
    scorer_tool: ToolSpec | None = None

    def __post_init__(self):
        if self.kind is AdapterKind.WATERMARK_REFERENCE:
            if self.message_pair is None:
                raise ValueError(f"{self.name}: watermark systems need a message pair")
            if len(self.message_pair) != self.watermark.n_bits:
                raise LengthMismatch(f"{self.name}: message length {len(self.message_pair)} "
                                     f"!= watermark n_bits {self.watermark.n_bits}")
        if self.kind is AdapterKind.SCORE_FILE and self.scores is None:
            raise ValueError(f"{self.name}: score_file systems need a score map")
        if self.kind is AdapterKind.EXTERNAL_SCORER and self.scorer_tool is None:
            raise ValueError(f"{self.name}: external scorers need a command")

    @property
    def is_watermark(self) -> bool:
        return self.kind is AdapterKind.WATERMARK_REFERENCE

    def embed_message(self, label: str) -> Message:
        assert self.message_pair is not None
        return self.message_pair.m_real if label == "real" else self.message_pair.m_fake


def builtin_baseline_score(w: Waveform, cfg: StftConfig | None = None) -> float:
    """Negative spectral flatness of the mean magnitude spectrum; 0 for silence.

    Not a deepfake detector. It only exercises the passive-system path.
    """
    if len(w) == 0:
        raise ValueError("baseline score needs a non-empty waveform")
    if not np.any(w.samples):
        return 0.0
    mag = np.abs(stft(w, cfg).frames).mean(axis=0)
    if not np.any(mag):
        return 0.0
    mag = np.maximum(mag, 1e-20)
    flatness = math.exp(float(np.mean(np.log(mag)))) / float(np.mean(mag))
    return -flatness


def score_trial(adapter: SystemAdapter, trial: Waveform | float | str) -> float:
    """Score one trial with higher-is-real polarity.

    Watermark and baseline systems take a waveform; score-file systems take
    the utterance id (or an already looked-up value).
    """
    kind = adapter.kind
    if kind is AdapterKind.WATERMARK_REFERENCE:
        if not isinstance(trial, Waveform):
            raise AdapterFailure(f"{adapter.name}: watermark scoring needs a waveform")
        raw = fuse_score(detect_bits(trial, adapter.watermark), adapter.message_pair)
    elif kind is AdapterKind.BUILTIN_BASELINE:
        if not isinstance(trial, Waveform):
            raise AdapterFailure(f"{adapter.name}: baseline scoring needs a waveform")
        raw = builtin_baseline_score(trial)
    elif isinstance(trial, str):
        if adapter.scores is None or trial not in adapter.scores:
            raise MissingScore(f"{adapter.name}: no score for {trial}")
        raw = adapter.scores[trial]
    elif isinstance(trial, (int, float)) and not isinstance(trial, bool):
        raw = float(trial)
    else:
        raise AdapterFailure(f"{adapter.name}: {kind.value} expects an utterance id or score")
    if not math.isfinite(raw):
        raise AdapterFailure(f"{adapter.name}: non-finite score")
    return adapter.polarity.orient(float(raw))


def parse_score_lines(lines: Iterable[str]) -> dict[str, float]:
    out: dict[str, float] = {}
    for i, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 2:
            raise ParseFailure(f"expected '<utt_id> <score>', got {line.strip()!r}", i)
        try:
            value = float(fields[1])
        except ValueError:
            raise ParseFailure(f"score {fields[1]!r} is not a number", i) from None
        if not math.isfinite(value):
            raise ParseFailure(f"score {fields[1]!r} is not finite", i)
        if fields[0] in out:
            warnings.warn(f"line {i}: duplicate utterance {fields[0]}, keeping the later score",
                          stacklevel=2)
        out[fields[0]] = value
    return out


def read_score_file(path) -> dict[str, float]:
    with open(path, encoding="utf-8") as fh:
        return parse_score_lines(fh)


def run_external_scorer(tool: ToolSpec, items: Sequence[tuple[str, Waveform | Path]]
                        ) -> dict[str, float]:
    """Run ``scorer <manifest> <scores>`` over ``items`` and read the scores back.

    Waveform items are written to a scratch directory first; path items are
    listed as they are.
    """
    with tempfile.TemporaryDirectory(prefix="wmbench-score-") as tmp:
        tmp = Path(tmp)
        manifest = tmp / "manifest.txt"
        scores = tmp / "scores.txt"
        rows = []
        for i, (utt, w) in enumerate(items):
            if isinstance(w, Waveform):
                wav = tmp / f"{i:06d}.wav"
                write_pcm(w, wav, bit_depth=16)
            else:
                wav = Path(w)
            rows.append(f"{wav} {utt}\n")
        manifest.write_text("".join(rows), encoding="utf-8")
        argv = [*tool.command, str(manifest), str(scores), *tool.args]
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=tool.timeout_s)
        except (FileNotFoundError, subprocess.TimeoutExpired) as exc:
            raise AdapterFailure(f"scorer {tool.command[0]} failed to run: {exc}") from exc
        if proc.returncode != 0:
            raise AdapterFailure(f"scorer {tool.command[0]} exited {proc.returncode}")
        if not scores.exists():
            raise AdapterFailure(f"scorer {tool.command[0]} wrote no score file")
        return read_score_file(scores)
