import math

import pytest

from moyalrel.phasegrid import make_grid


@pytest.fixture
def small_grid():
    return make_grid(64, math.sqrt(2 * math.pi * 64))


@pytest.fixture
def packet_grid():
    # Fits a sigma_q = 1 packet with every tail below 1e-12.
    return make_grid(128, 2 * math.pi * 128 / 24)


_VERDICTS = []


@pytest.fixture
def verdict(capsys):
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""

    def record(tag, ok, detail):
        line = f"{tag} {'PASS' if ok else 'FAIL'}  {detail}"
        _VERDICTS.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
