from fractions import Fraction

import pytest
from hypothesis import strategies as st

from rankone import PRESETS, Engine, IntervalSet


@pytest.fixture(scope="session")
def chacon():
    return Engine(PRESETS["chacon3"])


@pytest.fixture(scope="session")
def staircase():
    return Engine(PRESETS["staircase4"])


@st.composite
def interval_sets(draw, max_den=24, max_intervals=5):
    den = draw(st.integers(1, max_den))
    points = draw(st.lists(st.integers(0, den), max_size=2 * max_intervals))
    points = sorted(set(points))
    if len(points) % 2:
        points = points[:-1]
    return IntervalSet(
        (Fraction(points[i], den), Fraction(points[i + 1], den))
        for i in range(0, len(points), 2))


# -- acceptance summary lines --------------------------------------------------------

ACCEPTANCE: dict = {}


def record(number: int, ok: bool, detail: str) -> None:
    """Remember one acceptance verdict; printed at the end of the session."""
    ACCEPTANCE[number] = (ok, detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
