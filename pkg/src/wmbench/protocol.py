"""Trial protocols, toy datasets and run manifests."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

import numpy as np

from .audio import Waveform, write_pcm
from .errors import DuplicateUtterance, MissingAudio, ParseFailure
from .metrics import FAKE, REAL
from .synth import speech_like

log = logging.getLogger(__name__)

KEY_TO_LABEL = {"bonafide": REAL, "spoof": FAKE}


@dataclass(frozen=True)
class TrialEntry:
    utterance_id: str
    label: str
    attack_tag: str | None = None
    audio_path: str | None = None

    def __post_init__(self):
        if self.label not in (REAL, FAKE):
            raise ValueError(f"label must be 'real' or 'fake', got {self.label!r}")


@dataclass(frozen=True)
class TrialList:
    entries: tuple[TrialEntry, ...]

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.utterance_id in seen:
                raise DuplicateUtterance(f"utterance {e.utterance_id} listed twice")
            seen.add(e.utterance_id)

    def __len__(self):
        return len(self.entries)

    def __iter__(self) -> Iterator[TrialEntry]:
        return iter(self.entries)

    def ids(self) -> list[str]:
        return [e.utterance_id for e in self.entries]

    def count(self, label: str) -> int:
        return sum(e.label == label for e in self.entries)


def parse_cm_protocol(lines: Iterable[str]) -> TrialList:
    """Parse ``speaker utt_id - attack key`` lines (key is bonafide or spoof)."""
    entries = []
    seen: dict[str, int] = {}
    for i, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) < 5:
            raise ParseFailure(f"expected at least 5 fields, got {len(fields)}", i)
        utt, attack, key = fields[1], fields[3], fields[4]
        if key not in KEY_TO_LABEL:
            raise ParseFailure(f"key must be 'bonafide' or 'spoof', got {key!r}", i)
        if utt in seen:
            raise DuplicateUtterance(f"line {i}: utterance {utt} already on line {seen[utt]}")
        seen[utt] = i
        entries.append(TrialEntry(utt, KEY_TO_LABEL[key], None if attack == "-" else attack))
    return TrialList(tuple(entries))


def read_cm_protocol(path) -> TrialList:
    with open(path, encoding="utf-8") as fh:
        return parse_cm_protocol(fh)


@dataclass
class RunManifest:
    """Everything needed to replay a run, plus what the run sampled."""

    master_seed: int
    dataset: dict[str, Any]
    conditions: list[str]
    systems: list[dict[str, Any]]
    trials: list[dict[str, Any]]
    skipped_trials: list[dict[str, str]] = field(default_factory=list)
    params: dict[str, dict[str, Any]] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def trial_list(self) -> TrialList:
        return TrialList(tuple(TrialEntry(t["utterance_id"], t["label"], t.get("attack_tag"),
                                          t.get("audio_path")) for t in self.trials))


def build_manifest(trials: TrialList, audio_root, *, ext: str = ".wav",
                   missing: str = "fail", master_seed: int = 0,
                   conditions: Iterable[str] = (), systems: Iterable[dict] = (),
                   dataset: dict[str, Any] | None = None) -> RunManifest:
    """Bind each trial to ``<audio_root>/<utt_id><ext>``.

    ``missing="fail"`` raises :class:`MissingAudio` on the first absent file;
    ``missing="skip"`` records it in ``skipped_trials`` and carries on.
    """
    if missing not in ("fail", "skip"):
        raise ValueError(f"missing policy must be 'fail' or 'skip', got {missing!r}")
    root = Path(audio_root)
    bound, skipped = [], []
    for e in trials:
        path = root / f"{e.utterance_id}{ext}"
        if not path.is_file():
            if missing == "fail":
                raise MissingAudio(f"no audio for {e.utterance_id} at {path}")
            log.warning("skipping %s: %s not found", e.utterance_id, path)
            skipped.append({"utterance_id": e.utterance_id, "reason": "missing audio"})
            continue
        bound.append({"utterance_id": e.utterance_id, "label": e.label,
                      "attack_tag": e.attack_tag, "audio_path": str(path)})
    ds = dict(dataset or {})
    ds.setdefault("audio_root", str(root))
    return RunManifest(master_seed=int(master_seed), dataset=ds, conditions=list(conditions),
                       systems=list(systems), trials=bound, skipped_trials=skipped)


def _toy_rng(seed: int, utt: str) -> np.random.Generator:
    digest = hashlib.sha256(f"toy\x1f{int(seed)}\x1f{utt}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "little"))


def toy_id(label: str, i: int) -> str:
    return f"TOY_{'R' if label == REAL else 'F'}_{i:04d}"


def toy_waveform(seed: int, utterance_id: str, label: str,
                 duration_range: tuple[float, float] = (1.0, 3.0)) -> Waveform:
    """Regenerate one toy fixture from its (seed, utterance id) alone."""
    rng = _toy_rng(seed, utterance_id)
    return speech_like(rng, float(rng.uniform(*duration_range)), fake=(label == FAKE))


def synth_toy_trials(n_real: int, n_fake: int, seed: int, out_dir=None,
                     duration_range: tuple[float, float] = (1.0, 3.0)
                     ) -> tuple[TrialList, dict[str, Waveform]]:
    """Speech-like toy trials; each fixture depends only on (seed, utterance id).

    With ``out_dir`` the fixtures are also written as 16-bit WAV files next to
    a ``protocol.txt`` in the five-field layout.
    """
    if n_real < 1 or n_fake < 1:
        raise ValueError("need at least one real and one fake trial")
    entries, audio = [], {}
    for label, n in ((REAL, n_real), (FAKE, n_fake)):
        for i in range(n):
            utt = toy_id(label, i)
            audio[utt] = toy_waveform(seed, utt, label, duration_range)
            entries.append(TrialEntry(utt, label, None if label == REAL else "TOY"))
    trials = TrialList(tuple(entries))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        lines = []
        for e in trials:
            write_pcm(audio[e.utterance_id], out / f"{e.utterance_id}.wav", bit_depth=16)
            key = "bonafide" if e.label == REAL else "spoof"
            lines.append(f"TOY {e.utterance_id} - {e.attack_tag or '-'} {key}\n")
        (out / "protocol.txt").write_text("".join(lines), encoding="utf-8")
    return trials, audio
