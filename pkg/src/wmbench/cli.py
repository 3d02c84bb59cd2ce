"""Command-line entry point: ``wmbench <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .audio import DEFAULT_SAMPLE_RATE, read_pcm, resample, snr_db, write_pcm
from .config import WORKERS_ENV, load_config
from .dsp.conditions import (ConditionKind, ConditionSpec, Resources, TrialSeed,
                             apply_with_params, draw_params)
from .dsp.external import ToolSpec
from .errors import MissingScore, WmbenchError
from .harness import run_eval
from .metrics import ScoredTrial, estimate_eer
from .protocol import RunManifest, read_cm_protocol, synth_toy_trials
from .report import render_report
from .scorer import MessagePair, fuse_score, read_score_file
from .watermark import Message, WatermarkConfig, bit_accuracy, detect_bits, embed

log = logging.getLogger("wmbench")


def _load16k(path):
    w = read_pcm(path)
    return w if w.sample_rate == DEFAULT_SAMPLE_RATE else resample(w, DEFAULT_SAMPLE_RATE)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    updates = {}
    if args.output is not None:
        updates["output_dir"] = Path(args.output)
    if args.workers is not None:
        updates["workers"] = args.workers
    if updates:
        cfg = cfg.model_copy(update=updates)
    replay = RunManifest.read(args.replay) if args.replay else None
    report = run_eval(cfg, replay=replay)
    sys.stdout.write(render_report(report, args.format))
    if report.failures:
        log.warning("%d failure group(s); see the report footnotes", len(report.failures))
    return 0


def cmd_attack(args) -> int:
    w = _load16k(args.input)
    kind = ConditionKind.parse(args.condition)
    tools = {}
    if args.tool:
        tools[kind] = ToolSpec.parse(args.tool)
    res = Resources(args.musan_dir, args.rir_dir, tools)
    spec = ConditionSpec(kind, res)
    spec.check_resources()
    if args.params:
        params = json.loads(args.params)
    else:
        params = draw_params(spec, w, TrialSeed(args.seed, kind.value, args.utterance_id))
    out = apply_with_params(kind, w, params, res)
    write_pcm(out, args.output, bit_depth=32 if args.float else 16)
    print(json.dumps({"condition": kind.value, "params": params}, sort_keys=True))
    return 0


def _wm_config(args) -> WatermarkConfig:
    return WatermarkConfig(n_bits=args.bits, scheme=args.scheme)


def cmd_embed(args) -> int:
    w = _load16k(args.input)
    cfg = _wm_config(args)
    out = embed(w, Message.from_hex(args.message, cfg.n_bits), cfg)
    write_pcm(out, args.output, bit_depth=32 if args.float else 16)
    print(f"embedded {args.message} into {args.output}; SNR {snr_db(w.samples, out.samples):.2f} dB")
    return 0


def cmd_detect(args) -> int:
    w = _load16k(args.input)
    cfg = _wm_config(args)
    bits = detect_bits(w, cfg)
    result = {"bits": bits.hard_bits().to_hex(),
              "bit_scores": [round(float(v), 6) for v in bits.values]}
    if args.message:
        result["bit_accuracy"] = bit_accuracy(bits, Message.from_hex(args.message, cfg.n_bits))
    if args.real:
        m_real = Message.from_hex(args.real, cfg.n_bits)
        m_fake = Message.from_hex(args.fake, cfg.n_bits) if args.fake else m_real.complement()
        result["score"] = fuse_score(bits, MessagePair(m_real, m_fake))
    print(json.dumps(result, sort_keys=True))
    return 0


def cmd_eer(args) -> int:
    scores = read_score_file(args.scorefile)
    trials = read_cm_protocol(args.protocol)
    scored, missing = [], []
    for e in trials:
        if e.utterance_id in scores:
            s = scores[e.utterance_id]
            scored.append(ScoredTrial(e.utterance_id, e.label, -s if args.higher_is_fake else s))
        else:
            missing.append(e.utterance_id)
    if missing and not args.allow_missing:
        raise MissingScore(f"{len(missing)} trial(s) have no score, first: {missing[0]}")
    r = estimate_eer(scored)
    print(f"EER {100 * r.eer:.2f}%  tau* {r.tau_star:.6g}  P_FA {r.p_fa_at_tau:.4f}  "
          f"P_FR {r.p_fr_at_tau:.4f}  trials {len(scored)}  missing {len(missing)}")
    return 0


def cmd_gen_toys(args) -> int:
    trials, _ = synth_toy_trials(args.real, args.fake, args.seed, out_dir=args.dir,
                                 duration_range=(args.min_duration, args.max_duration))
    print(f"wrote {len(trials)} trials and protocol.txt to {args.dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wmbench",
                                description="Robustness benchmark for audio deepfake detection "
                                            "and watermarking.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="full evaluation from a YAML config",
                       epilog=f"{WORKERS_ENV} overrides the worker count.")
    r.add_argument("config")
    r.add_argument("--output", help="output directory (overrides the config)")
    r.add_argument("--workers", type=int)
    r.add_argument("--replay", help="reuse the condition parameters of a run manifest")
    r.add_argument("--format", choices=("markdown", "csv", "json"), default="markdown",
                   help="format printed to stdout")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("attack", help="apply one condition to a file")
    a.add_argument("input")
    a.add_argument("output")
    a.add_argument("--condition", required=True)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--utterance-id", default="cli", help="id mixed into the trial seed")
    a.add_argument("--params", help="JSON parameters instead of sampling them")
    a.add_argument("--musan-dir", type=Path)
    a.add_argument("--rir-dir", type=Path)
    a.add_argument("--tool", help="command for codec/enhancement conditions")
    a.add_argument("--float", action="store_true", help="write 32-bit float output")
    a.set_defaults(func=cmd_attack)

    for name, func, help_ in (("embed", cmd_embed, "embed a message"),
                              ("detect", cmd_detect, "read bit scores")):
        e = sub.add_parser(name, help=f"reference watermarker: {help_}")
        e.add_argument("input")
        if name == "embed":
            e.add_argument("output")
            e.add_argument("--message", required=True, help="message as hex")
            e.add_argument("--float", action="store_true", help="write 32-bit float output")
        else:
            e.add_argument("--message", help="expected message (hex) for bit accuracy")
            e.add_argument("--real", help="M_real (hex) to print the fused score")
            e.add_argument("--fake", help="M_fake (hex); defaults to the complement of M_real")
        e.add_argument("--bits", type=int, default=16)
        e.add_argument("--scheme", choices=("informed", "fixed"), default="informed")
        e.set_defaults(func=func)

    m = sub.add_parser("eer", help="EER of a score file against a protocol")
    m.add_argument("scorefile")
    m.add_argument("protocol")
    m.add_argument("--higher-is-fake", action="store_true")
    m.add_argument("--allow-missing", action="store_true")
    m.set_defaults(func=cmd_eer)

    g = sub.add_parser("gen-toys", help="write a toy dataset")
    g.add_argument("dir")
    g.add_argument("--real", type=int, default=20)
    g.add_argument("--fake", type=int, default=20)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--min-duration", type=float, default=1.0)
    g.add_argument("--max-duration", type=float, default=3.0)
    g.set_defaults(func=cmd_gen_toys)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (WmbenchError, ValueError, OSError) as exc:
        print(f"wmbench {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
