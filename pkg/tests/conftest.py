"""Shared pytest plumbing for the acceptance suite.

``verdict`` wraps each acceptance check: it prints one PASS/FAIL line per
criterion and repeats all of them in a terminal-summary section, which stays
visible even when pytest captures test stdout.
"""

import time
from contextlib import contextmanager

_VERDICTS = {}


@contextmanager
def verdict(number, name):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        line = f"FAIL  {number:2d}/10  {name}"
        _VERDICTS[number] = line
        print(f"acceptance {line}")
        raise
    elapsed = time.perf_counter() - started
    line = f"PASS  {number:2d}/10  {name} ({elapsed:.1f}s)"
    _VERDICTS[number] = line
    print(f"acceptance {line}")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance")
    for number in sorted(_VERDICTS):
        terminalreporter.write_line(_VERDICTS[number])
