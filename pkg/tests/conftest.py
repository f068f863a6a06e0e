import numpy as np
import pytest

from otabc.measures import EmpiricalMeasure

_CRITERIA = {}
N_CRITERIA = 9


@pytest.fixture
def record_criterion():
    """Store and print a one-line verdict for an acceptance criterion."""

    def record(number, passed, detail):
        _CRITERIA[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        if k in _CRITERIA:
            ok, detail = _CRITERIA[k]
            terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} | {detail}")
        else:
            terminalreporter.write_line(f"criterion {k}: NOT RUN")


def random_measure(rng, size, dim=1, grid=None):
    """Random atomic measure; atoms drawn from ``grid`` when given (forces overlaps)."""
    if grid is None:
        pts = rng.normal(size=(size, dim))
    else:
        pts = rng.choice(grid, size=(size, dim))
    w = rng.random(size) + 0.05
    return EmpiricalMeasure(pts, w / w.sum())
