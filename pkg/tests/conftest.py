import pytest

from bulkq.model import GridConfig, QueueConfig

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_cfg():
    return QueueConfig(k=2, B=3, mu=1.0)


@pytest.fixture
def small_grid():
    return GridConfig(N=6, x_max=2.0, M=20)
