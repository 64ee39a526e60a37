import numpy as np
import pytest

CRITERION_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240801)


def pytest_configure(config):
    np.seterr(all="raise", under="ignore")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
