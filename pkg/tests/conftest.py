import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wmbench.protocol import synth_toy_trials
from wmbench.synth import speech_like
from wmbench.watermark import Message, WatermarkConfig, embed

settings.register_profile("wmbench", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("wmbench")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def speech():
    """A handful of short speech-like fixtures."""
    rng = np.random.default_rng(77)
    return [speech_like(rng, d, fake=bool(i % 2)) for i, d in enumerate((0.6, 1.0, 1.7, 2.5))]


@pytest.fixture(scope="session")
def watermarked():
    """100 speech-like fixtures, each with its own random message, embedded once."""
    trials, audio = synth_toy_trials(50, 50, seed=2025)
    rng = np.random.default_rng(99)
    cfg = WatermarkConfig()
    out = []
    for e in trials:
        w = audio[e.utterance_id]
        m = Message.random(rng, cfg.n_bits)
        out.append((w, m, embed(w, m, cfg)))
    return out
