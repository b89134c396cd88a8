"""Collects the one-line acceptance verdicts and repeats them after the run."""
import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict(capsys):
    def emit(number: int, name: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number} {name}: {detail}"
        VERDICTS.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
