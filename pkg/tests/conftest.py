import pytest

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one criterion's verdict; the line is printed in the terminal summary."""

    def record(label, passed, detail):
        _ACCEPTANCE.append(f"{'PASS' if passed else 'FAIL'} {label}: {detail}")
        print(_ACCEPTANCE[-1])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
