"""Collects one verdict line per acceptance criterion and prints them at the end of the run."""

import pytest

VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def record(number, passed, detail, informational=False):
        status = "INFO" if informational else ("PASS" if passed else "FAIL")
        line = f"criterion {number}: {status}  {detail}"
        VERDICTS.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
