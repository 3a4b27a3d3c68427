"""Shared pytest hooks: collects the acceptance PASS/FAIL lines and echoes
them in the terminal summary so they are visible without -s."""
import pytest

_ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def criterion_report():
    """Reporter for acceptance tests: prints one line, records it, asserts."""

    def report(num: int, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=_criterion_number):
            terminalreporter.write_line(line)


def _criterion_number(line: str) -> int:
    return int(line.split("criterion ")[1].split(":")[0])
