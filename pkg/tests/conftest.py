import pytest

from wavop.wavelets import build_system

ACCEPTANCE_LINES = []


def record_criterion(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number} ({title}): {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def family1():
    return build_system(1)


@pytest.fixture(scope="session")
def family2():
    return build_system(2)


@pytest.fixture(scope="session")
def record():
    return record_criterion
