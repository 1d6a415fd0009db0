import sys

from hybridjit import _deep

# raise the limit before any test runs so hypothesis sees a stable value
if sys.getrecursionlimit() < _deep.RECURSION_LIMIT:
    sys.setrecursionlimit(_deep.RECURSION_LIMIT)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
