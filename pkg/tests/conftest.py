import pytest

from fuzzyca.rules import builtin_rule

# acceptance results, filled by tests/test_acceptance.py and printed at the end
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def R1():
    return builtin_rule("R1")


@pytest.fixture(scope="session")
def R2():
    return builtin_rule("R2")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)
