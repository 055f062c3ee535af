import numpy as np
import pytest

from latereverb.dataset import SynthSpec, synth_rir
from latereverb.dsp_core import Signal

FS = 48000

# criterion number -> (passed, description, detail); filled by test_acceptance
ACCEPTANCE = {}


def record(number, passed, description, detail=""):
    ACCEPTANCE[number] = (bool(passed), description, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, description, detail = ACCEPTANCE[number]
        line = f"[{number}] {'PASS' if passed else 'FAIL'}  {description}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def noise(seed, n=FS, fs=FS):
    return Signal(np.random.default_rng(seed).standard_normal(n), fs)


def decay(t60, seed, length_s=1.0, fs=FS):
    return synth_rir(SynthSpec(t60, length_s, fs, seed))


@pytest.fixture
def decay_pair():
    return decay(1.0, 1), decay(1.0, 2)
