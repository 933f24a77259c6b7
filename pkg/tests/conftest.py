import pytest

# acceptance verdicts, printed together at the end of the run
VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def record(number: int, ok: bool, detail: str) -> bool:
        VERDICTS.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(VERDICTS[-1])
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
