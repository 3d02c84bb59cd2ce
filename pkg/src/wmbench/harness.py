"""Batch evaluation: embed, apply each condition, score, then EER per cell.

Watermark systems embed M_real into real trials and M_fake into fake trials
before the condition is applied; passive systems see the conditioned raw
audio. Per-trial work runs in a process pool and depends only on the trial
and its derived seed, so results do not depend on the worker count.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .audio import DEFAULT_SAMPLE_RATE, Waveform, read_pcm, resample, write_pcm
from .config import RunConfig, SystemConfig
from .dsp.conditions import (DEFAULT_PARTIALLY_SEEN, ConditionKind, ConditionSpec, Resources,
                             TrialSeed, apply_with_params, draw_params)
from .errors import SkippedCondition, WmbenchError
from .metrics import FAKE, REAL, eer_from_arrays
from .protocol import (RunManifest, TrialEntry, build_manifest, read_cm_protocol,
                       toy_id, toy_waveform)
from .scorer import (AdapterKind, SystemAdapter, fuse_score, run_external_scorer,
                     score_trial)
from .watermark import bit_accuracy, detect_bits, embed


def cache_key(condition, utterance: str, master_seed: int, namespace: str = "passive") -> str:
    """Stable hash naming one conditioned waveform in the cache directory."""
    cond = condition.value if isinstance(condition, ConditionKind) else str(condition)
    text = json.dumps([namespace, cond, utterance, int(master_seed)], separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:32]


@dataclass(frozen=True)
class TrialScore:
    system: str
    condition: ConditionKind
    utterance_id: str
    label: str
    score: float | None
    bit_accuracy: float | None = None
    skip_reason: str | None = None


@dataclass(frozen=True)
class CellResult:
    system: str
    condition: ConditionKind
    eer: float | None
    tau_star: float | None
    n_trials: int
    skipped: int
    partially_seen: bool
    note: str | None = None


@dataclass
class EvalReport:
    systems: tuple[str, ...]
    conditions: tuple[ConditionKind, ...]
    cells: dict[tuple[str, ConditionKind], CellResult]
    partially_seen_rows: frozenset[ConditionKind]
    n_total: int
    trial_scores: tuple[TrialScore, ...] = ()
    failures: tuple[str, ...] = ()
    manifest: RunManifest | None = None

    def cell(self, system: str, condition: ConditionKind) -> CellResult:
        return self.cells[(system, condition)]

    def average(self, system: str) -> float | None:
        """Mean EER over non-None conditions; unscored cells are left out."""
        vals = [self.cells[(system, c)].eer for c in self.conditions
                if c is not ConditionKind.NONE and self.cells[(system, c)].eer is not None]
        return math.fsum(vals) / len(vals) if vals else None

    def excluded(self, system: str) -> list[ConditionKind]:
        return [c for c in self.conditions
                if c is not ConditionKind.NONE and self.cells[(system, c)].eer is None]


# ---------------------------------------------------------------------------
# per-trial work


@dataclass(frozen=True)
class _Task:
    utterance_id: str
    label: str
    audio_path: str | None


@dataclass(frozen=True)
class _Context:
    master_seed: int
    toy: tuple[int, float, float] | None
    conditions: tuple[ConditionKind, ...]
    resources: Resources
    watermark_systems: tuple[SystemAdapter, ...]
    passive_systems: tuple[SystemAdapter, ...]
    dump_dir: str | None = None
    cache_dir: str | None = None
    cache_namespace: str = "passive"
    replay: Mapping[str, Mapping[str, Any]] | None = None


@dataclass
class _TrialResult:
    scores: list[TrialScore]
    params: dict[str, dict[str, Any]]
    dumped: dict[str, str] = field(default_factory=dict)


def _reason(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _load(ctx: _Context, task: _Task) -> Waveform:
    if task.audio_path is None:
        seed, lo, hi = ctx.toy
        return toy_waveform(seed, task.utterance_id, task.label, (lo, hi))
    w = read_pcm(task.audio_path)
    if w.sample_rate != DEFAULT_SAMPLE_RATE:
        w = resample(w, DEFAULT_SAMPLE_RATE)
    return w


def _passive_audio(ctx: _Context, cond: ConditionKind, task: _Task, raw: Waveform,
                   params: Mapping[str, Any]) -> Waveform:
    if ctx.cache_dir is None:
        return apply_with_params(cond, raw, params, ctx.resources)
    key = cache_key(cond, task.utterance_id, ctx.master_seed, ctx.cache_namespace)
    path = Path(ctx.cache_dir) / f"{key}.npy"
    if path.exists():
        return Waveform(np.load(path), raw.sample_rate)
    out = apply_with_params(cond, raw, params, ctx.resources)
    fd, tmp = tempfile.mkstemp(dir=ctx.cache_dir, suffix=".npy")
    with os.fdopen(fd, "wb") as fh:
        np.save(fh, out.samples)
    os.replace(tmp, path)
    return out


def _trial_params(ctx: _Context, cond: ConditionKind, task: _Task, raw: Waveform) -> dict[str, Any]:
    if ctx.replay is not None:
        stored = ctx.replay.get(cond.value, {}).get(task.utterance_id)
        if stored is None:
            raise WmbenchError(f"manifest has no parameters for {cond.value}/{task.utterance_id}")
        if "skipped" in stored:
            raise SkippedCondition(stored["skipped"])
        return dict(stored)
    spec = ConditionSpec(cond, ctx.resources)
    return draw_params(spec, raw, TrialSeed(ctx.master_seed, cond.value, task.utterance_id))


def _evaluate_trial(ctx: _Context, task: _Task) -> _TrialResult:
    systems = ctx.watermark_systems + ctx.passive_systems
    res = _TrialResult([], {})

    def skip_all(cond, reason, which=systems):
        for a in which:
            res.scores.append(TrialScore(a.name, cond, task.utterance_id, task.label, None,
                                         skip_reason=reason))

    try:
        raw = _load(ctx, task)
    except Exception as exc:  # noqa: BLE001 - collect and continue
        for cond in ctx.conditions:
            skip_all(cond, _reason(exc))
            res.params[cond.value] = {"skipped": _reason(exc)}
        return res

    marked: dict[str, Waveform | str] = {}
    for a in ctx.watermark_systems:
        try:
            marked[a.name] = embed(raw, a.embed_message(task.label), a.watermark)
        except Exception as exc:  # noqa: BLE001
            marked[a.name] = _reason(exc)

    for cond in ctx.conditions:
        try:
            params = _trial_params(ctx, cond, task, raw)
        except Exception as exc:  # noqa: BLE001
            res.params[cond.value] = {"skipped": _reason(exc)}
            skip_all(cond, _reason(exc))
            continue
        res.params[cond.value] = params

        if ctx.passive_systems or ctx.dump_dir is not None:
            try:
                conditioned = _passive_audio(ctx, cond, task, raw, params)
            except Exception as exc:  # noqa: BLE001
                conditioned = None
                skip_all(cond, _reason(exc), ctx.passive_systems)
            if conditioned is not None:
                for a in ctx.passive_systems:
                    try:
                        s = score_trial(a, conditioned)
                        res.scores.append(TrialScore(a.name, cond, task.utterance_id, task.label, s))
                    except Exception as exc:  # noqa: BLE001
                        skip_all(cond, _reason(exc), (a,))
                if ctx.dump_dir is not None:
                    d = Path(ctx.dump_dir) / cond.value
                    d.mkdir(parents=True, exist_ok=True)
                    path = d / f"{task.utterance_id}.wav"
                    write_pcm(conditioned, path, bit_depth=32)
                    res.dumped[cond.value] = str(path)

        for a in ctx.watermark_systems:
            w = marked[a.name]
            if isinstance(w, str):
                skip_all(cond, w, (a,))
                continue
            try:
                out = apply_with_params(cond, w, params, ctx.resources)
                bits = detect_bits(out, a.watermark)
                s = a.polarity.orient(fuse_score(bits, a.message_pair))
                acc = bit_accuracy(bits, a.embed_message(task.label))
                res.scores.append(TrialScore(a.name, cond, task.utterance_id, task.label, s, acc))
            except Exception as exc:  # noqa: BLE001
                skip_all(cond, _reason(exc), (a,))
    return res


_WORKER_CTX: _Context | None = None


def _init_worker(ctx: _Context) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _run_task(task: _Task) -> _TrialResult:
    return _evaluate_trial(_WORKER_CTX, task)


def _map_trials(ctx: _Context, tasks: Sequence[_Task], workers: int) -> list[_TrialResult]:
    if workers <= 1 or len(tasks) <= 1:
        return [_evaluate_trial(ctx, t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks)), initializer=_init_worker,
                             initargs=(ctx,)) as pool:
        return list(pool.map(_run_task, tasks))


# ---------------------------------------------------------------------------
# orchestration


def _dataset_trials(cfg: RunConfig) -> tuple[list[_Task], list[dict[str, str]], dict[str, Any]]:
    ds = cfg.dataset
    if ds.toy is not None:
        toy = ds.toy
        entries = [TrialEntry(toy_id(label, i), label)
                   for label, n in ((REAL, toy.n_real), (FAKE, toy.n_fake)) for i in range(n)]
        tasks = [_Task(e.utterance_id, e.label, None) for e in entries]
        return tasks, [], {"toy": toy.model_dump(mode="json")}
    trials = read_cm_protocol(ds.protocol)
    man = build_manifest(trials, ds.audio_root, ext=ds.audio_ext, missing=ds.missing)
    tasks = [_Task(t["utterance_id"], t["label"], t["audio_path"]) for t in man.trials]
    labels = {e.utterance_id: e.label for e in trials}
    skipped = [dict(s, label=labels[s["utterance_id"]]) for s in man.skipped_trials]
    return tasks, skipped, {"protocol": str(ds.protocol), "audio_root": str(ds.audio_root),
                            "audio_ext": ds.audio_ext, "missing": ds.missing}


def _external_scores(system: SystemAdapter, cond: ConditionKind, tasks: Sequence[_Task],
                     dumped: Sequence[dict[str, str]]) -> list[TrialScore]:
    rows = [(t.utterance_id, Path(d[cond.value])) for t, d in zip(tasks, dumped) if cond.value in d]
    scores: dict[str, float] = {}
    failure = None
    if rows:
        try:
            scores = run_external_scorer(system.scorer_tool, rows)
        except Exception as exc:  # noqa: BLE001
            failure = _reason(exc)
    out = []
    for t, d in zip(tasks, dumped):
        if cond.value not in d:
            reason = "condition failed on this trial"
        elif failure is not None:
            reason = failure
        elif t.utterance_id not in scores:
            reason = f"MissingScore: scorer returned no score for {t.utterance_id}"
        else:
            s = system.polarity.orient(scores[t.utterance_id])
            out.append(TrialScore(system.name, cond, t.utterance_id, t.label, s))
            continue
        out.append(TrialScore(system.name, cond, t.utterance_id, t.label, None, skip_reason=reason))
    return out


def _score_file_scores(cfg: RunConfig, s: SystemConfig, cond: ConditionKind,
                       tasks: Sequence[_Task]) -> list[TrialScore]:
    if cond.value not in s.score_files:
        return [TrialScore(s.name, cond, t.utterance_id, t.label, None,
                           skip_reason=f"no score file for {cond.value}") for t in tasks]
    try:
        adapter = cfg.build_adapter(s, cond)
    except Exception as exc:  # noqa: BLE001
        return [TrialScore(s.name, cond, t.utterance_id, t.label, None, skip_reason=_reason(exc))
                for t in tasks]
    out = []
    for t in tasks:
        try:
            out.append(TrialScore(s.name, cond, t.utterance_id, t.label,
                                  score_trial(adapter, t.utterance_id)))
        except Exception as exc:  # noqa: BLE001
            out.append(TrialScore(s.name, cond, t.utterance_id, t.label, None,
                                  skip_reason=_reason(exc)))
    return out


def _cell(system: str, cond: ConditionKind, rows: Sequence[TrialScore], n_total: int,
          seen: bool, condition_reason: str | None) -> CellResult:
    scored = [r for r in rows if r.score is not None]
    n = len(scored)
    skipped = n_total - n
    if condition_reason is not None:
        return CellResult(system, cond, None, None, 0, n_total, seen, condition_reason)
    real = np.array([r.score for r in scored if r.label == REAL])
    fake = np.array([r.score for r in scored if r.label == FAKE])
    if len(real) == 0 or len(fake) == 0:
        reasons = sorted({r.skip_reason for r in rows if r.skip_reason})
        note = reasons[0] if reasons else "no scored trials"
        if n:
            note = f"only one class scored ({len(real)} real, {len(fake)} fake)"
        return CellResult(system, cond, None, None, n, skipped, seen, note)
    e = eer_from_arrays(real, fake)
    note = f"{skipped} trial(s) skipped" if skipped else None
    return CellResult(system, cond, e.eer, e.tau_star, n, skipped, seen, note)


def _run_notes(conditions: Sequence[ConditionKind]) -> list[str]:
    notes = []
    if ConditionKind.GAUSSIAN_NOISE in conditions:
        notes.append("GaussianNoise: SNR drawn per utterance from {5, 10, 15} dB")
    if ConditionKind.QUANTIZATION in conditions:
        notes.append("Quantization: 32-bit draws pass the float signal through unchanged")
    return notes


def run_eval(cfg: RunConfig, *, replay: RunManifest | None = None,
             write: bool = True) -> EvalReport:
    """Run the full evaluation described by ``cfg``.

    With ``replay`` the stored per-trial condition parameters are used
    instead of being drawn again, and the manifest's master seed replaces
    the config's so default message pairs match the original run. With ``write`` and an output directory the
    report, manifest and per-trial scores are written there.
    """
    if replay is not None:
        cfg = cfg.model_copy(update={"master_seed": replay.master_seed})
    conditions = tuple(cfg.condition_kinds())
    resources = cfg.resources.build(cfg.dataset.audio_ext)
    tasks, missing, dataset_desc = _dataset_trials(cfg)
    if replay is not None:
        want = [t["utterance_id"] for t in replay.trials]
        if want != [t.utterance_id for t in tasks]:
            raise WmbenchError("replay manifest lists a different trial set than the config")
    n_total = len(tasks) + len(missing)

    condition_skip: dict[ConditionKind, str] = {}
    for cond in conditions:
        try:
            ConditionSpec(cond, resources).check_resources()
        except SkippedCondition as exc:
            condition_skip[cond] = str(exc)
    active = tuple(c for c in conditions if c not in condition_skip)

    by_kind: dict[AdapterKind, list[SystemConfig]] = {}
    for s in cfg.systems:
        by_kind.setdefault(s.kind, []).append(s)
    wm = tuple(cfg.build_adapter(s) for s in by_kind.get(AdapterKind.WATERMARK_REFERENCE, []))
    builtin = tuple(cfg.build_adapter(s) for s in by_kind.get(AdapterKind.BUILTIN_BASELINE, []))
    external = [cfg.build_adapter(s) for s in by_kind.get(AdapterKind.EXTERNAL_SCORER, [])]

    scratch = tempfile.mkdtemp(prefix="wmbench-run-") if external else None
    cache_dir = None
    if cfg.cache:
        cache_dir = cfg.cache_dir or (cfg.output_dir / "cache" if cfg.output_dir else None)
        if cache_dir is None:
            raise WmbenchError("cache is enabled but neither cache_dir nor output_dir is set")
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
    fingerprint = hashlib.sha256(json.dumps(dataset_desc, sort_keys=True).encode()).hexdigest()[:12]
    toy = cfg.dataset.toy
    ctx = _Context(cfg.master_seed,
                   (toy.seed, toy.min_duration_s, toy.max_duration_s) if toy else None,
                   active, resources, wm, builtin, scratch,
                   str(cache_dir) if cache_dir is not None else None,
                   f"passive:{fingerprint}", replay.params if replay is not None else None)
    try:
        results = _map_trials(ctx, tasks, cfg.effective_workers())
        rows: list[TrialScore] = [r for res in results for r in res.scores]
        for a in external:
            for cond in active:
                rows.extend(_external_scores(a, cond, tasks, [res.dumped for res in results]))
    finally:
        if scratch is not None:
            shutil.rmtree(scratch, ignore_errors=True)
    for s in by_kind.get(AdapterKind.SCORE_FILE, []):
        for cond in active:
            rows.extend(_score_file_scores(cfg, s, cond, tasks))

    names = tuple(s.name for s in cfg.systems)
    declared = {s.name: {ConditionKind(c) for c in s.partially_seen} for s in cfg.systems}
    union = set().union(*declared.values())
    seen_rows = frozenset(union or DEFAULT_PARTIALLY_SEEN) - {ConditionKind.NONE}

    grouped: dict[tuple[str, ConditionKind], list[TrialScore]] = {}
    for r in rows:
        grouped.setdefault((r.system, r.condition), []).append(r)
    cells = {}
    for name in names:
        for cond in conditions:
            cells[(name, cond)] = _cell(name, cond, grouped.get((name, cond), []), n_total,
                                        cond in declared[name], condition_skip.get(cond))

    sys_order = {n: i for i, n in enumerate(names)}
    cond_order = {c: i for i, c in enumerate(conditions)}
    trial_order = {t.utterance_id: i for i, t in enumerate(tasks)}
    rows.sort(key=lambda r: (sys_order[r.system], cond_order[r.condition],
                             trial_order[r.utterance_id]))
    failures = _summarize_failures(rows)

    params: dict[str, dict[str, Any]] = {c.value: {} for c in conditions}
    for t, res in zip(tasks, results):
        for cond_value, p in res.params.items():
            params[cond_value][t.utterance_id] = p
    for cond, reason in condition_skip.items():
        params[cond.value] = {t.utterance_id: {"skipped": reason} for t in tasks}
    manifest = RunManifest(
        master_seed=cfg.master_seed, dataset=dataset_desc,
        conditions=[c.value for c in conditions],
        systems=[s.model_dump(mode="json") for s in cfg.systems],
        trials=[{"utterance_id": t.utterance_id, "label": t.label, "attack_tag": None,
                 "audio_path": t.audio_path} for t in tasks],
        skipped_trials=missing, params=params, notes=_run_notes(conditions))
    report = EvalReport(names, conditions, cells, seen_rows, n_total, tuple(rows),
                        tuple(failures), manifest)
    if write and cfg.output_dir is not None:
        write_outputs(report, cfg.output_dir, cfg.report_formats)
    return report


def _summarize_failures(rows: Sequence[TrialScore]) -> list[str]:
    counts: dict[tuple[str, str, str], int] = {}
    for r in rows:
        if r.skip_reason is not None:
            key = (r.system, r.condition.value, r.skip_reason)
            counts[key] = counts.get(key, 0) + 1
    return [f"{s} / {c}: {n} trial(s): {reason}" for (s, c, reason), n in sorted(counts.items())]


def scores_tsv(report: EvalReport) -> str:
    lines = ["system\tcondition\tutterance_id\tlabel\tscore\tbit_accuracy\tskip_reason\n"]
    for r in report.trial_scores:
        score = "" if r.score is None else repr(r.score)
        acc = "" if r.bit_accuracy is None else repr(r.bit_accuracy)
        lines.append(f"{r.system}\t{r.condition.value}\t{r.utterance_id}\t{r.label}\t"
                     f"{score}\t{acc}\t{r.skip_reason or ''}\n")
    return "".join(lines)


REPORT_FILES = {"markdown": "report.md", "csv": "report.csv", "json": "report.json"}


def write_outputs(report: EvalReport, out_dir, formats: Sequence[str] = tuple(REPORT_FILES)) -> None:
    from .report import render_report

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fmt in formats:
        (out / REPORT_FILES[fmt]).write_text(render_report(report, fmt), encoding="utf-8")
    if report.manifest is not None:
        report.manifest.write(out / "manifest.json")
    (out / "scores.tsv").write_text(scores_tsv(report), encoding="utf-8")
