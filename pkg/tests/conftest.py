import pytest

from dblab.bitcore import PrfSpec, RngSpec


@pytest.fixture
def prf():
    return PrfSpec(b"k0-test-key")


@pytest.fixture
def rng():
    return RngSpec(20240611)


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
