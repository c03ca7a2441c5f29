"""Shared fixtures plus the end-of-run acceptance summary."""

import pytest

from isacsim.config import desk_scale

# Populated by tests/test_acceptance.py; echoed after the test report so the
# per-criterion verdicts are visible in any pytest invocation.
CRITERION_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(CRITERION_LINES):
        terminalreporter.write_line(line)


@pytest.fixture
def tiny_cfg():
    """Gradient-check scale; small enough for brute force and FD probes."""
    return desk_scale(n_antennas=8, n_subcarriers=16, n_angle_grid=90,
                      n_range_grid=25, master_seed=0)


@pytest.fixture
def desk_cfg():
    return desk_scale(master_seed=0)
