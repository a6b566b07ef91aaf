import numpy as np
import pytest

from maxwell_pml.grid import make_grid

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid8():
    return make_grid(8, 8, 8, 1.0, 1.0, 1.0, 0.9)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
