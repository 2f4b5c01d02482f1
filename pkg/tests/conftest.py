import numpy as np
import pytest

from rcsync.dynamics import integrate, lorenz, washout_source

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    def report(criterion: str, passed: bool, detail: str = "") -> None:
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}" + (f" -- {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def lorenz_attractor_state():
    return washout_source(lorenz(), [1.0, 1.0, 1.0], 50.0)


@pytest.fixture(scope="session")
def lorenz_traj(lorenz_attractor_state):
    return integrate(lorenz(), lorenz_attractor_state, 0.05, 1999, substeps=10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
