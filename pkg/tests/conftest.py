import sys
from dataclasses import replace

import pytest

from rtsalloc.data import SynthSpec, generate_synthetic, make_windows, split_chronological
from rtsalloc.pipeline import TrainConfig

SMALL_SYNTH = SynthSpec(kind="sinusoid-trend-noise", length=400, amplitude=1.0, period=12, noise_std=0.3, seed=5)
SMALL_TRAIN = TrainConfig(M=24, H=12, epochs=4, learning_rate=1e-2, batch_size=16, seed=3)


def splits_for(spec: SynthSpec, M: int, H: int, fractions=(0.7, 0.1, 0.2)):
    return split_chronological(make_windows(generate_synthetic(spec), M, H), fractions)


@pytest.fixture(scope="session")
def small_splits():
    return splits_for(SMALL_SYNTH, SMALL_TRAIN.M, SMALL_TRAIN.H)


@pytest.fixture
def small_cfg():
    return replace(SMALL_TRAIN)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.LINES):
            terminalreporter.write_line(mod.LINES[n])
