import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion.

    Lines are echoed immediately and replayed in the terminal summary so the
    full checklist is visible in a plain ``pytest -v`` run.
    """

    def record(num: int, description: str, ok: bool):
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'} - {description}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
