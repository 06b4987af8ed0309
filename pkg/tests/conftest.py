"""Shared pytest wiring: echo acceptance verdicts past output capture.

The acceptance tests append one PASS/FAIL line each to
:data:`ACCEPTANCE_VERDICTS`; printing them from inside a test would be
swallowed by pytest's fd-level capture, so a terminal-summary section
replays them after the run.
"""

ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
