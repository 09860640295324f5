import mpmath as mp
import pytest

from opqlog import acceptance


@pytest.fixture(autouse=True)
def _reset_mp():
    mp.mp.dps = 15
    yield
    mp.mp.dps = 15


@pytest.fixture(scope="session")
def d0():
    return acceptance.d0_value()


@pytest.fixture(scope="session")
def log_table_5000():
    return acceptance.log_table()


@pytest.fixture(scope="session")
def model_table_5000():
    return acceptance.model_table()


CRITERION_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERION_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
