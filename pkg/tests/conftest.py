import pytest

from acceptance_log import LOG


def pytest_terminal_summary(terminalreporter):
    if not LOG:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(LOG):
        terminalreporter.write_line(LOG[number])


@pytest.fixture(scope="session")
def data():
    from lnecheck.io import data_path
    return data_path
