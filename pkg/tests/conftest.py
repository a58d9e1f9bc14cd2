import numpy as np
import pytest

from covlda.model import CountData, CovariateMatrix, Hyperparams, LatentState

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_data():
    counts = np.array([[3, 0, 2, 1], [0, 4, 1, 0], [2, 2, 0, 3], [0, 0, 0, 0], [1, 1, 1, 1]])
    return CountData(counts)


@pytest.fixture
def small_X():
    x = np.array([[0.5, -1.0], [1.0, 0.2], [-0.3, 0.4], [0.0, 0.0], [2.0, -0.5]])
    return CovariateMatrix.with_intercept(x)


@pytest.fixture
def small_state(small_data, rng):
    return LatentState.random(small_data, 3, rng)


@pytest.fixture
def small_hp(small_data):
    return Hyperparams.default(small_data.S, 3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
