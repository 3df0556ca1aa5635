import pytest

_LINES = []


@pytest.fixture
def accept():
    """Record one acceptance line and fail the test when ``ok`` is false."""
    def record(k, ok, detail):
        _LINES.append((k, f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"))
        assert ok, detail
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_LINES):
            terminalreporter.write_line(line)
