import math

import pytest

from poincare_jets.flow import SectionChart, find_closed_orbit
from poincare_jets.models import pendulum_torus


@pytest.fixture(scope="session")
def pendulum():
    return pendulum_torus()


@pytest.fixture(scope="session")
def chart():
    return SectionChart(0, 0.0, 2 * math.pi)


@pytest.fixture(scope="session")
def orbit_45(pendulum, chart):
    """The x1 = y1 = 0 orbit at energy 9/2 (y0 = 3, T = 2 pi / 3)."""
    return find_closed_orbit(pendulum, 4.5, [0.0, 0.0], chart, momentum_guess=3.0)


@pytest.fixture(scope="session")
def orbit_23(pendulum, chart):
    return find_closed_orbit(pendulum, 2.3, [0.0, 0.0], chart, momentum_guess=2.0)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", []) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
