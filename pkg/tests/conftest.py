"""Shared fixtures: grids, ground states and branches are computed once per session."""

from __future__ import annotations

import numpy as np
import pytest

from cqnls.experiments import branch_for
from cqnls.groundstate import compute_branch, solve_ground_state
from cqnls.spectral import build_grid

#: Criterion lines collected by the acceptance tests, printed at the end.
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def report_criterion():
    def report(number: int, passed: bool, detail: str):
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return report


@pytest.fixture(scope="session")
def grid2():
    return build_grid(2, 300, 1e3)


@pytest.fixture(scope="session")
def grid3():
    return build_grid(3, 300, 1e3)


@pytest.fixture(scope="session")
def q2(grid2):
    return solve_ground_state(2, 0.1, grid=grid2)


@pytest.fixture(scope="session")
def q3(grid3):
    return solve_ground_state(3, 0.1, grid=grid3)


@pytest.fixture(scope="session")
def branch3(grid3):
    """d = 3 branch over [0.005, 0.16] with spacing 0.0025 at desk scale."""
    omegas = np.round(np.arange(0.005, 0.16 + 1e-9, 0.0025), 6)
    return compute_branch(3, omegas, grid=grid3)


@pytest.fixture(scope="session")
def branch2(grid2):
    """d = 2 branch on a 40-point grid over [0.005, 0.16]."""
    return compute_branch(2, np.linspace(0.005, 0.16, 40), grid=grid2)


@pytest.fixture(scope="session")
def matching_branch3():
    """Matching library for the long 3D runs (N = 400, s0 = 1e4)."""
    return branch_for(3, 400, 1e4, grid=build_grid(3, 400, 1e4))


@pytest.fixture(scope="session")
def stable_branches(grid2, grid3):
    """Small branches around omega = 0.1 for the stable-branch scenarios."""
    omegas = np.round(np.arange(0.08, 0.12 + 1e-9, 0.0025), 6)
    return {2: compute_branch(2, omegas, grid=grid2), 3: compute_branch(3, omegas, grid=grid3)}
