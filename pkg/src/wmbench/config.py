"""Run configuration: a YAML tree validated with pydantic.

Minimal example::

    master_seed: 1234
    dataset:
      toy: {n_real: 20, n_fake: 20, seed: 7}
    systems:
      - name: reference-wm
        kind: watermark_reference
        polarity: higher_is_real
    conditions: [GaussianNoise, RandomTrimming]
    output_dir: runs/demo
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .audio import StftConfig
from .dsp.conditions import ALL_CONDITIONS, ConditionKind, Resources
from .dsp.external import ToolSpec
from .errors import ConfigInvalid
from .scorer import AdapterKind, MessagePair, Polarity, SystemAdapter, read_score_file
from .watermark import Message, WatermarkConfig

WORKERS_ENV = "WMBENCH_WORKERS"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ToyDataset(_Strict):
    n_real: int = Field(20, ge=1)
    n_fake: int = Field(20, ge=1)
    seed: int = 0
    min_duration_s: float = Field(1.0, ge=0.5)
    max_duration_s: float = 3.0

    @model_validator(mode="after")
    def _durations(self):
        if self.max_duration_s < self.min_duration_s:
            raise ValueError("max_duration_s must be >= min_duration_s")
        return self


class DatasetConfig(_Strict):
    toy: ToyDataset | None = None
    protocol: Path | None = None
    audio_root: Path | None = None
    audio_ext: str = ".wav"
    missing: Literal["fail", "skip"] = "fail"

    @model_validator(mode="after")
    def _one_source(self):
        if self.toy is None and self.protocol is None:
            raise ValueError("dataset needs either 'toy' or 'protocol' + 'audio_root'")
        if self.toy is not None and self.protocol is not None:
            raise ValueError("dataset takes 'toy' or 'protocol', not both")
        if self.protocol is not None and self.audio_root is None:
            raise ValueError("'protocol' needs 'audio_root'")
        return self


class WatermarkSection(_Strict):
    n_bits: int = 16
    scheme: Literal["informed", "fixed"] = "informed"
    low_hz: float = 3500.0
    high_hz: float = 7000.0
    guard_bins: int = 2
    margin: float = 0.06
    window_fraction: float = 0.25
    max_passes: int = 6
    strength_alpha: float = 0.20

    def build(self) -> WatermarkConfig:
        return WatermarkConfig(**self.model_dump(), stft=StftConfig())


class ToolSection(_Strict):
    command: str | list[str]
    args: list[str] = []
    timeout_s: float = 300.0

    def build(self) -> ToolSpec:
        return ToolSpec.parse(self.command, self.args, self.timeout_s)


class SystemConfig(_Strict):
    name: str
    kind: AdapterKind
    polarity: Polarity
    partially_seen: list[str] = []
    message_real: str | None = None
    message_fake: str | None = None
    watermark: WatermarkSection = WatermarkSection()
    score_files: dict[str, Path] = {}
    command: ToolSection | None = None

    @field_validator("partially_seen")
    @classmethod
    def _known(cls, v):
        return [ConditionKind.parse(c).value for c in v]

    @field_validator("score_files")
    @classmethod
    def _known_keys(cls, v):
        return {ConditionKind.parse(k).value: p for k, p in v.items()}

    @model_validator(mode="after")
    def _kind_fields(self):
        if self.kind is AdapterKind.SCORE_FILE and not self.score_files:
            raise ValueError(f"system {self.name!r}: score_file systems need 'score_files'")
        if self.kind is AdapterKind.EXTERNAL_SCORER and self.command is None:
            raise ValueError(f"system {self.name!r}: external_scorer systems need 'command'")
        if self.kind is AdapterKind.WATERMARK_REFERENCE:
            n = self.watermark.n_bits
            for label in ("message_real", "message_fake"):
                text = getattr(self, label)
                if text is not None:
                    try:
                        Message.from_hex(text, n)
                    except ValueError as exc:
                        raise ValueError(f"system {self.name!r}: {label}: {exc}") from None
        return self


class ResourcesConfig(_Strict):
    musan_dir: Path | None = None
    rir_dir: Path | None = None
    tools: dict[str, ToolSection] = {}

    @field_validator("tools")
    @classmethod
    def _known_tools(cls, v):
        return {ConditionKind.parse(k).value: t for k, t in v.items()}

    def build(self, audio_ext: str = ".wav") -> Resources:
        return Resources(self.musan_dir, self.rir_dir,
                         {ConditionKind(k): t.build() for k, t in self.tools.items()}, audio_ext)


class RunConfig(_Strict):
    master_seed: int = 0
    dataset: DatasetConfig
    systems: list[SystemConfig]
    conditions: list[str] = [c.value for c in ALL_CONDITIONS]
    resources: ResourcesConfig = ResourcesConfig()
    output_dir: Path | None = None
    workers: int = Field(1, ge=1)
    cache: bool = False
    cache_dir: Path | None = None
    report_formats: list[Literal["markdown", "csv", "json"]] = ["markdown", "csv", "json"]

    @field_validator("systems")
    @classmethod
    def _nonempty(cls, v):
        if not v:
            raise ValueError("at least one system is required")
        names = [s.name for s in v]
        if len(set(names)) != len(names):
            raise ValueError("system names must be unique")
        return v

    @field_validator("conditions")
    @classmethod
    def _with_none(cls, v):
        kinds = {ConditionKind.parse(c) for c in v}
        kinds.add(ConditionKind.NONE)
        return [c.value for c in ALL_CONDITIONS if c in kinds]

    def condition_kinds(self) -> list[ConditionKind]:
        return [ConditionKind(c) for c in self.conditions]

    def effective_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV, "").strip()
        if env:
            try:
                n = int(env)
            except ValueError:
                raise ConfigInvalid(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
            if n < 1:
                raise ConfigInvalid(f"{WORKERS_ENV} must be >= 1")
            return n
        return self.workers

    def message_pair(self, s: SystemConfig) -> MessagePair:
        """Per-run pair: explicit hex, else drawn from the master seed and system name."""
        n = s.watermark.n_bits
        if s.message_real is not None:
            m_real = Message.from_hex(s.message_real, n)
        else:
            rng = np.random.default_rng([int(self.master_seed) & (2**63 - 1),
                                         *s.name.encode("utf-8")])
            m_real = Message.random(rng, n)
        m_fake = Message.from_hex(s.message_fake, n) if s.message_fake else m_real.complement()
        return MessagePair(m_real, m_fake)

    def build_adapter(self, s: SystemConfig, condition: ConditionKind | None = None) -> SystemAdapter:
        seen = frozenset(ConditionKind(c) for c in s.partially_seen)
        kw: dict[str, Any] = {}
        if s.kind is AdapterKind.WATERMARK_REFERENCE:
            kw["message_pair"] = self.message_pair(s)
            kw["watermark"] = s.watermark.build()
        elif s.kind is AdapterKind.SCORE_FILE:
            path = s.score_files.get(condition.value) if condition is not None else None
            kw["scores"] = read_score_file(path) if path is not None else {}
        elif s.kind is AdapterKind.EXTERNAL_SCORER:
            kw["scorer_tool"] = s.command.build()
        return SystemAdapter(s.name, s.kind, s.polarity, seen, **kw)


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "invalid config:\n  " + "\n  ".join(parts)


def parse_config(data: dict[str, Any], base_dir: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("config must be a mapping at the top level")
    try:
        cfg = RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigInvalid(_format_error(exc)) from None
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from None
    if base_dir is not None:
        cfg = _resolve_paths(cfg, Path(base_dir))
    return cfg


def _resolve(p: Path | None, base: Path) -> Path | None:
    if p is None or p.is_absolute():
        return p
    return base / p


def _resolve_paths(cfg: RunConfig, base: Path) -> RunConfig:
    ds = cfg.dataset.model_copy(update={"protocol": _resolve(cfg.dataset.protocol, base),
                                        "audio_root": _resolve(cfg.dataset.audio_root, base)})
    systems = [s.model_copy(update={"score_files": {k: _resolve(v, base)
                                                    for k, v in s.score_files.items()}})
               for s in cfg.systems]
    res = cfg.resources.model_copy(update={"musan_dir": _resolve(cfg.resources.musan_dir, base),
                                           "rir_dir": _resolve(cfg.resources.rir_dir, base)})
    return cfg.model_copy(update={"dataset": ds, "systems": systems, "resources": res,
                                  "output_dir": _resolve(cfg.output_dir, base),
                                  "cache_dir": _resolve(cfg.cache_dir, base)})


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"config {path} is not valid YAML: {exc}") from None
    return parse_config(data or {}, base_dir=path.parent)
