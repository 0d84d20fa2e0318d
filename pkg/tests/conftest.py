import numpy as np
import pytest
from hypothesis import settings

from drowsiness import dataset

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_recording():
    return dataset.synth_recording(dataset.SynthSpec(n_epochs=12, seed=5))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
