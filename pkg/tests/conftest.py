import numpy as np
import pytest

from cowgait import synth
from cowgait.trajectory import TrajectorySet


def make_traj(n=20, video_id="v1", cow_id="c1", seed=0, walk=True):
    """Random-ish but valid trajectory walking left to right."""
    rng = np.random.default_rng(seed)
    coords = rng.uniform(100, 200, size=(n, 9, 2))
    if walk:
        coords[:, :, 0] += np.arange(n)[:, None] * 20.0
    return TrajectorySet(video_id, cow_id, coords)


@pytest.fixture
def healthy():
    return synth.generate(synth.healthy_preset(seed=1))


@pytest.fixture
def lame():
    return synth.generate(synth.lame_preset(seed=1))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
