import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from wpmec.config import SimConfig, desk_config  # noqa: E402


@pytest.fixture
def cfg() -> SimConfig:
    return SimConfig()


@pytest.fixture
def desk() -> SimConfig:
    return desk_config()


@pytest.fixture
def tiny() -> SimConfig:
    """Small enough that a few training episodes run in well under a second each."""
    return desk_config(num_devices=4, episodes=6, slots_per_episode=20, batch_size=16,
                       hidden_sizes=(16, 16), replay_capacity=500, target_sync=10)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
