import pytest

ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion; printed at the end of the run."""

    def emit(number, passed, detail):
        line = f"ACCEPTANCE {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
