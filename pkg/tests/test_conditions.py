import sys

import numpy as np
import pytest

from wmbench.audio import Waveform, read_pcm, snr_db, write_pcm
from wmbench.dsp import (ALL_CONDITIONS, DEFAULT_PARTIALLY_SEEN, MANIPULATION, TRANSMISSION,
                         Category, ConditionKind, ConditionSpec, Group, Resources, ToolSpec,
                         TrialSeed, apply_condition, apply_with_params, check_params,
                         default_category, draw_params, external_condition, run_tool)
from wmbench.dsp.conditions import GAUSSIAN_SNRS, TOOL_CONDITIONS
from wmbench.errors import MalformedToolOutput, RangeViolation, SkippedCondition, ToolFailure

K = ConditionKind
SELF_CONTAINED = [k for k in ALL_CONDITIONS if k not in TOOL_CONDITIONS]


def _tool(tmp_path, body: str, name="tool.py") -> ToolSpec:
    script = tmp_path / name
    script.write_text("import sys\nfrom wmbench.audio import read_pcm, write_pcm, Waveform\n"
                      "import numpy as np\nsrc, dst = sys.argv[1], sys.argv[2]\n" + body)
    return ToolSpec.parse([sys.executable, str(script)])


def test_catalogue_shape():
    assert len(ALL_CONDITIONS) == 18 and ALL_CONDITIONS[0] is K.NONE
    assert len(TRANSMISSION) == 8 and len(MANIPULATION) == 9
    assert all(k.group is Group.TRANSMISSION for k in TRANSMISSION)
    assert all(k.group is Group.MANIPULATION for k in MANIPULATION)
    assert default_category(K.NONE) is Category.NOT_APPLIED
    for k in ALL_CONDITIONS[1:]:
        want = Category.PARTIALLY_SEEN if k in DEFAULT_PARTIALLY_SEEN else Category.UNSEEN
        assert default_category(k) is want


def test_parse_names():
    assert K.parse("gaussian_noise") is K.GAUSSIAN_NOISE
    assert K.parse("Pitch Shift") is K.PITCH_SHIFT
    with pytest.raises(ValueError):
        K.parse("Reverb")


def test_trial_seed_is_stable_and_distinct():
    a = TrialSeed(1, "GaussianNoise", "u1")
    assert a.stream_seed() == TrialSeed(1, "GaussianNoise", "u1").stream_seed()
    others = {TrialSeed(2, "GaussianNoise", "u1"), TrialSeed(1, "Rir", "u1"),
              TrialSeed(1, "GaussianNoise", "u2")}
    assert all(o.stream_seed() != a.stream_seed() for o in others)


def test_none_is_identity(speech):
    w = speech[2]
    assert apply_condition(ConditionSpec(K.NONE), w, TrialSeed(0, "None", "x")) is w


@pytest.mark.parametrize("kind", SELF_CONTAINED, ids=lambda k: k.value)
def test_condition_contracts(kind, speech):
    w = speech[2]
    seed = TrialSeed(11, kind.value, "utt")
    spec = ConditionSpec(kind)
    a = apply_condition(spec, w, seed)
    b = apply_condition(spec, w, seed)
    assert np.array_equal(a.samples, b.samples)
    assert np.max(np.abs(a.samples)) <= 1.0
    params = draw_params(spec, w, seed)
    check_params(kind, params, len(w))
    assert np.array_equal(apply_with_params(kind, w, params).samples, a.samples)
    if kind is K.TIME_STRETCH:
        assert abs(len(a) - round(len(w) / params["rate"])) <= 256
    elif kind is K.RANDOM_TRIMMING:
        assert np.array_equal(w.samples[params["start"]:params["end"]], a.samples)
    else:
        assert len(a) == len(w)


def test_gaussian_condition_snr(speech):
    for i, w in enumerate(speech):
        seed = TrialSeed(3, "GaussianNoise", f"u{i}")
        snr = draw_params(ConditionSpec(K.GAUSSIAN_NOISE), w, seed)["snr_db"]
        assert snr in GAUSSIAN_SNRS
        y = apply_condition(ConditionSpec(K.GAUSSIAN_NOISE), w, seed)
        assert abs(snr_db(w.samples, y.samples) - snr) <= 0.1


def test_params_out_of_range_rejected(speech):
    with pytest.raises(RangeViolation):
        check_params(K.GAUSSIAN_NOISE, {"snr_db": 7.0}, 100)
    with pytest.raises(RangeViolation):
        apply_with_params(K.COMPRESSOR, speech[1], {"threshold_db": -5.0, "ratio": 4.0})
    with pytest.raises(RangeViolation):
        check_params(K.RANDOM_TRIMMING, {"start": 90, "end": 100}, 100)


def test_rejects_other_rates():
    w = Waveform(np.ones(8000) * 0.1, sample_rate=8000)
    with pytest.raises(ValueError):
        apply_with_params(K.CLIPPING, w, {"lo_pct": 1.0, "hi_pct": 99.0})


@pytest.mark.parametrize("kind", sorted(TOOL_CONDITIONS, key=lambda k: k.value),
                         ids=lambda k: k.value)
def test_tool_conditions_skip_without_binding(kind, speech):
    with pytest.raises(SkippedCondition):
        apply_condition(ConditionSpec(kind), speech[1], TrialSeed(0, kind.value, "u"))
    missing = Resources(tools={kind: ToolSpec.parse("/nonexistent/codec")})
    with pytest.raises(SkippedCondition):
        ConditionSpec(kind, missing).check_resources()


def test_corpus_dirs(tmp_path, speech):
    (tmp_path / "musan").mkdir()
    write_pcm(speech[0], tmp_path / "musan" / "n1.wav")
    res = Resources(musan_dir=tmp_path / "musan")
    seed = TrialSeed(0, "Musan", "u")
    params = draw_params(ConditionSpec(K.MUSAN, res), speech[2], seed)
    assert params["clip"] == "n1.wav"
    y = apply_with_params(K.MUSAN, speech[2], params, res)
    assert abs(snr_db(speech[2].samples, y.samples) - 10.0) <= 0.1
    empty = Resources(rir_dir=tmp_path / "nothing")
    with pytest.raises(SkippedCondition):
        draw_params(ConditionSpec(K.RIR, empty), speech[2], TrialSeed(0, "Rir", "u"))


# -- external tools ---------------------------------------------------------

def test_copy_tool_round_trip(tmp_path, speech):
    tool = _tool(tmp_path, "import shutil\nshutil.copy(src, dst)\n")
    w = speech[1]
    y = external_condition(w, tool)
    assert len(y) == len(w)
    assert np.max(np.abs(y.samples - w.samples)) <= 2**-15


def test_tool_failure(tmp_path, speech):
    tool = _tool(tmp_path, "sys.exit(1)\n")
    with pytest.raises(ToolFailure):
        external_condition(speech[1], tool)


def test_tool_output_trimmed_and_resampled(tmp_path, speech):
    longer = _tool(tmp_path, "w = read_pcm(src)\n"
                   "write_pcm(Waveform(np.concatenate((w.samples, np.zeros(240)))), dst)\n",
                   "long.py")
    run = run_tool(speech[1], longer)
    assert run.raw_length == len(speech[1]) + 240 and len(run.output) == len(speech[1])
    upsampled = _tool(tmp_path, "from wmbench.audio import resample\n"
                      "write_pcm(resample(read_pcm(src), 48000), dst)\n", "up.py")
    run = run_tool(speech[1], upsampled)
    assert run.raw_rate == 48000 and len(run.output) == len(speech[1])


def test_tool_malformed_output(tmp_path, speech):
    none = _tool(tmp_path, "pass\n", "none.py")
    with pytest.raises(MalformedToolOutput):
        external_condition(speech[1], none)
    junk = _tool(tmp_path, "open(dst, 'wb').write(b'junk')\n", "junk.py")
    with pytest.raises(MalformedToolOutput):
        external_condition(speech[1], junk)


def test_opus_bitrate_is_passed(tmp_path, speech):
    log = tmp_path / "args.txt"
    tool = _tool(tmp_path, "import shutil\nshutil.copy(src, dst)\n"
                 f"open({str(log)!r}, 'w').write(' '.join(sys.argv[3:]))\n", "opus.py")
    res = Resources(tools={K.OPUS: tool})
    seed = TrialSeed(0, "Opus", "u")
    params = draw_params(ConditionSpec(K.OPUS, res), speech[1], seed)
    y = apply_condition(ConditionSpec(K.OPUS, res), speech[1], seed)
    assert len(y) == len(speech[1]) and params["bitrate_kbps"] in (1, 2, 4, 8, 16, 31)
    assert log.read_text() == str(params["bitrate_kbps"])


def test_read_back_helper(tmp_path, speech):
    write_pcm(speech[0], tmp_path / "a.wav", bit_depth=32)
    assert np.allclose(read_pcm(tmp_path / "a.wav").samples, speech[0].samples, atol=1e-7)
