import pytest

_LINES = {}


@pytest.fixture(scope="session")
def report():
    """report(n, title, ok, detail) prints and records one acceptance line."""

    def _report(n, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {title}: {detail}"
        _LINES[n] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
