import pytest

_LINES = []


class Gate:
    """Collects one pass/fail line per acceptance criterion."""

    def record(self, criterion: str, passed: bool, detail: str) -> bool:
        _LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
        print(_LINES[-1])
        return passed


@pytest.fixture(scope="session")
def gate():
    return Gate()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
