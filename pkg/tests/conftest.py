import numpy as np
import pytest

from spikelink.core import SimClock


def run_ticks(step, frames, delta_t):
    """Call ``step(frame, clock)`` once per frame and return the batches."""
    return [step(f, SimClock(delta_t, k)) for k, f in enumerate(frames)]


def all_times(batches):
    ts = [b.times for b in batches if len(b)]
    return np.concatenate(ts) if ts else np.array([])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
