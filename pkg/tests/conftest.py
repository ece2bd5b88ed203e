import math
import time

import numpy as np
import pytest

from wqed_precursors.model import lattice
from wqed_precursors.modes import array_modes

HALF_PI = math.pi / 2
SUITE_BUDGET = 300.0  # seconds, single-threaded full run

_RESULTS: list[str] = []
_T0 = time.perf_counter()


def record(line: str) -> None:
    """Keep an acceptance verdict for the terminal summary."""
    _RESULTS.append(line)


@pytest.fixture(scope="session")
def verdicts():
    return record


def od_modes(n, od=5.0, phase=HALF_PI, **kw):
    arr = lattice(n, phase, od / n, **kw)
    return arr, array_modes(arr)


def random_lattice(rng, n_max=8, homogeneous=True):
    """Small chain at random phases and rates (positions sorted)."""
    n = int(rng.integers(1, n_max + 1))
    pos = tuple(np.sort(rng.uniform(0, 4 * np.pi, n)))
    g1 = float(rng.uniform(0.1, 3.0))
    gp = float(rng.uniform(0.2, 2.0))
    from wqed_precursors.model import ArrayConfig
    det = () if homogeneous else tuple(rng.normal(0, 0.5, n))
    return ArrayConfig(n, tuple(range(n)), 0.0, g1, gp, explicit_positions=pos,
                       site_detunings=det)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - _T0
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
    verdict = "PASS" if elapsed < SUITE_BUDGET else "FAIL"
    terminalreporter.write_line(
        f"full-suite wall time {elapsed:.1f} s (budget {SUITE_BUDGET:.0f} s): {verdict}")
    if _RESULTS:
        terminalreporter.write_line(
            f"criterion 14 (suite runtime {elapsed:.1f} s < {SUITE_BUDGET:.0f} s): {verdict}")


def pytest_sessionfinish(session, exitstatus):
    if time.perf_counter() - _T0 > SUITE_BUDGET and exitstatus == 0:
        session.exitstatus = 1
