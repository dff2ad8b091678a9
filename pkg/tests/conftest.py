"""Shared test plumbing: the acceptance-criterion result registry.

Acceptance tests record one entry per criterion; the terminal summary hook
prints an uncaptured pass/fail line for each so the gate's verdict is
visible in plain pytest output.
"""

from __future__ import annotations

ACCEPTANCE_RESULTS: list[tuple[int, str, bool, str]] = []


def record_criterion(number: int, name: str, passed: bool, detail: str = "") -> None:
    ACCEPTANCE_RESULTS.append((number, name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE_RESULTS):
        verdict = "PASS" if passed else "FAIL"
        line = f"[{verdict}] criterion {number:2d}: {name}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
