"""Shared builders for synthetic instances."""
from __future__ import annotations

import numpy as np
import pytest

from uavicic.channel import ChannelState
from uavicic.config import ScenarioConfig
from uavicic.scheduler import RbOccupancy


def synthetic_instance(rng, J=4, N=3, occ_prob=0.4, gamma_range=(0.5, 50.0), F_range=(0.1, 50.0)):
    """Random occupancy and normalised gains with a free cell on every RB."""
    occ = rng.random((J, N)) < occ_prob
    for n in range(N):
        if occ[:, n].all():
            occ[rng.integers(J), n] = False
    gamma = rng.uniform(*gamma_range, size=(J, N))
    F = rng.uniform(*F_range, size=(J, N))
    return ChannelState.from_normalized(F), RbOccupancy.from_mask(occ, gamma)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_config():
    """A quick scenario: 7 cells, 6 RBs, a handful of UEs."""
    return ScenarioConfig(snapshots=2).replace(**{
        "grid.tiers": 1, "ues.num_ues": 6, "ues.num_rbs": 6,
    })


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_line(request):
    """Record one summary line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
