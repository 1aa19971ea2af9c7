"""Shared pytest hooks: echo the acceptance-criteria pass/fail lines in the
terminal summary so they are visible even when output capture is on."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    if mod is None:
        return
    lines = getattr(mod, "ACCEPTANCE_LINES", [])
    if not lines:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for line in lines:
        terminalreporter.write_line(line)
