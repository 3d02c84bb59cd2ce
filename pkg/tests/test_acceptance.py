"""Acceptance suite: one pass/fail line per criterion, printed at the end of the run."""

import filecmp

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from test_metrics import oracle_eer
from wmbench.audio import StftConfig, Waveform, istft, snr_db, stft
from wmbench.config import parse_config
from wmbench.dsp import add_noise, equalize, pitch_shift, time_stretch
from wmbench.dsp.conditions import ConditionKind
from wmbench.dsp.spectral import EQ_CENTERS_HZ
from wmbench.dsp.timescale import VOCODER_STFT
from wmbench.harness import run_eval
from wmbench.metrics import ScoredTrial, estimate_eer, far_frr_at
from wmbench.scorer import MessagePair, fuse_score
from wmbench.synth import sine
from wmbench.watermark import Message, bit_accuracy, detect_bits

SR = 16000
WM = {"name": "wm", "kind": "watermark_reference", "polarity": "higher_is_real"}


def record(label, ok, detail):
    ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
    assert ok, f"{label}: {detail}"


def trials(real, fake):
    return ([ScoredTrial(f"r{i}", "real", s) for i, s in enumerate(real)]
            + [ScoredTrial(f"f{i}", "fake", s) for i, s in enumerate(fake)])


def peak_hz(x, sr=SR):
    spec = np.abs(np.fft.rfft(x * np.hanning(len(x)), n=8 * len(x)))
    return np.argmax(spec) * sr / (8 * len(x))


def rms_db(x):
    return 20 * np.log10(np.sqrt(np.mean(np.square(x))))


@pytest.fixture(scope="module")
def toy_run():
    """50 real + 50 fake toy trials through the reference watermarker."""
    cfg = parse_config({"master_seed": 11,
                        "dataset": {"toy": {"n_real": 50, "n_fake": 50, "seed": 21,
                                            "min_duration_s": 1.0, "max_duration_s": 1.5}},
                        "systems": [WM], "conditions": ["FrequencyMasking"]})
    return run_eval(cfg, write=False)


def test_01_fused_score_single_bit():
    s = fuse_score([0.7], MessagePair(Message((1,)), Message((0,))))
    record("01 fused score, L=1, s=0.7", s == 1.4, f"s = {s!r}, expected 1.4")


def test_02_eer_matches_oracle():
    rng = np.random.default_rng(2)
    bad = 0
    for _ in range(1000):
        n_real = int(rng.integers(1, 11))
        n_fake = int(rng.integers(1, 21 - n_real))
        if rng.random() < 0.5:
            real, fake = rng.integers(-4, 5, n_real) / 4, rng.integers(-4, 5, n_fake) / 4
        else:
            real, fake = rng.normal(0.5, 1, n_real), rng.normal(-0.5, 1, n_fake)
        real, fake = [float(v) for v in real], [float(v) for v in fake]
        r = estimate_eer(trials(real, fake))
        if (r.eer, r.tau_star) != oracle_eer(real, fake):
            bad += 1
    fixed = estimate_eer(trials([0.9, 0.8, 0.3], [0.7, 0.2, 0.1])).eer
    ok = bad == 0 and abs(100 * fixed - 33.33) <= 0.01
    record("02 EER vs exhaustive oracle", ok,
           f"{bad}/1000 mismatches; fixed case {100 * fixed:.4f}%")


def test_03_clean_watermark_run(toy_run):
    cell = toy_run.cell("wm", ConditionKind.NONE)
    rows = [t for t in toy_run.trial_scores if t.condition is ConditionKind.NONE]
    acc = [t.bit_accuracy for t in rows]
    ok = cell.eer == 0.0 and len(rows) == 100 and all(a == 1.0 for a in acc)
    record("03 clean watermark run", ok,
           f"EER {cell.eer}, {sum(a == 1.0 for a in acc)}/{len(rows)} trials at bit accuracy 1.0")


def test_04_noise_snr(watermarked):
    rng = np.random.default_rng(4)
    worst = 0.0
    for w, _, _ in watermarked[:50]:
        for snr in (5.0, 10.0, 15.0):
            worst = max(worst, abs(snr_db(w.samples, add_noise(w, snr, rng=rng).samples) - snr))
    record("04 noise SNR fidelity", worst <= 0.1, f"worst deviation {worst:.4f} dB on 50 fixtures")


def test_05_stft_round_trip():
    rng = np.random.default_rng(5)
    cfg = StftConfig()
    worst = 0.0
    for _ in range(100):
        x = rng.standard_normal(int(rng.integers(1, 40000))) * rng.uniform(0.01, 1.0)
        y = istft(stft(Waveform(x), cfg)).samples
        worst = max(worst, float(np.sqrt(np.mean((y - x) ** 2) / np.mean(x**2))))
    record("05 STFT round trip", worst <= 1e-6, f"worst relative RMS error {worst:.2e}")


def test_06_pitch_shift():
    w = sine(440, 1.0)
    details, ok = [], True
    for semis, target in ((5, 587.33), (-5, 329.63)):
        y = pitch_shift(w, semis)
        f = peak_hz(y.samples)
        ok &= abs(f - target) <= 0.01 * target and abs(len(y) - len(w)) <= VOCODER_STFT.hop
        details.append(f"{semis:+d} st -> {f:.2f} Hz, length {len(y)}")
    record("06 pitch shift", ok, "; ".join(details))


def test_07_time_stretch():
    w = sine(440, 1.0)
    details, ok = [], True
    for rate in (0.5, 1.0, 2.0):
        y = time_stretch(w, rate)
        off = abs(len(y) - round(len(w) / rate))
        ok &= off <= VOCODER_STFT.hop
        details.append(f"rate {rate}: length off by {off}")
        if rate == 1.0:
            c = float(np.corrcoef(y.samples, w.samples)[0, 1])
            ok &= c >= 0.99
            details.append(f"correlation {c:.4f}")
    record("07 time stretch", ok, "; ".join(details))


def test_08_equalizer():
    noise = Waveform(np.random.default_rng(8).standard_normal(SR) * 0.1)
    identity = np.array_equal(equalize(noise, [0.0] * len(EQ_CENTERS_HZ)).samples, noise.samples)
    gains = []
    for i, f in enumerate(EQ_CENTERS_HZ):
        w = sine(f, 1.0, amplitude=0.05)
        g = [0.0] * len(EQ_CENTERS_HZ)
        g[i] = 12.0
        y = equalize(w, g).samples
        gains.append(rms_db(y[4000:]) - rms_db(w.samples[4000:]))
    ok = identity and all(abs(g - 12.0) <= 1.0 for g in gains)
    record("08 equalizer", ok, f"0 dB identity {identity}; +12 dB gains "
           + ", ".join(f"{g:.2f}" for g in gains))


def test_09_trimmed_segments(watermarked):
    rng = np.random.default_rng(9)
    total = failed = 0
    for w, m, y in watermarked:
        n = len(y)
        half = -(-n // 2)
        spans = [(0, half), (n - half, n)]
        for _ in range(2):
            length = int(rng.integers(half, n + 1))
            start = int(rng.integers(0, n - length + 1))
            spans.append((start, start + length))
        for a, b in spans:
            total += 1
            failed += bit_accuracy(detect_bits(Waveform(y.samples[a:b])), m) != 1.0
    record("09 trimming robustness", failed == 0,
           f"{total - failed}/{total} segments of >= 50% decode perfectly")


def test_10_degradation_direction(watermarked, toy_run):
    rng = np.random.default_rng(10)
    hurt = sum(bit_accuracy(detect_bits(add_noise(y, 5.0, rng=rng)), m) < 1.0
               for _, m, y in watermarked)
    share = hurt / len(watermarked)
    e_none = toy_run.cell("wm", ConditionKind.NONE).eer
    e_mask = toy_run.cell("wm", ConditionKind.FREQUENCY_MASKING).eer
    ok = share >= 0.9 and e_mask is not None and e_mask >= e_none
    record("10 degradation direction", ok,
           f"5 dB noise lowers accuracy on {100 * share:.0f}% of fixtures; "
           f"EER masking {e_mask} vs none {e_none}")


def test_11_determinism(tmp_path, monkeypatch):
    monkeypatch.delenv("WMBENCH_WORKERS", raising=False)
    base = {"master_seed": 3,
            "dataset": {"toy": {"n_real": 6, "n_fake": 6, "seed": 8, "max_duration_s": 1.2}},
            "systems": [WM, {"name": "flat", "kind": "builtin_baseline",
                             "polarity": "higher_is_fake"}],
            "conditions": ["GaussianNoise", "RandomTrimming", "Clipping", "Equalizer",
                           "TimeStretch"]}
    dirs = {}
    for tag, workers in (("a", 1), ("b", 1), ("w4", 4), ("w8", 8)):
        dirs[tag] = tmp_path / tag
        run_eval(parse_config({**base, "workers": workers, "output_dir": str(dirs[tag])}))
    names = ["report.md", "report.csv", "report.json", "scores.tsv", "manifest.json"]
    differing = []
    for tag in ("b", "w4", "w8"):
        _, mismatch, errors = filecmp.cmpfiles(dirs["a"], dirs[tag], names, shallow=False)
        differing += [f"{tag}/{n}" for n in mismatch + errors]
    record("11 determinism", not differing,
           "repeat and workers 1/4/8 byte-identical" if not differing
           else f"differs: {', '.join(differing)}")


def test_12_ties_at_threshold():
    results = {tau: far_frr_at(tau, trials([tau] * 3, [tau] * 4)) for tau in (-1.0, 0.0, 0.37)}
    ok = all(v == (0.0, 0.0) for v in results.values())
    record("12 strict inequalities at ties", ok, f"(P_FA, P_FR) = {sorted(set(results.values()))}")
