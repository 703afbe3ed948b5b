from pathlib import Path

import pytest

from drivenrabi import ModelParams, find_cones
from drivenrabi.oracle import read_fixture

DATA = Path(__file__).parent / "data"

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def oracle_fixture():
    return read_fixture(DATA / "oracle_fixture.csv")


@pytest.fixture(scope="session")
def cone_search():
    """Cached find_cones(delta, plane_n, g_max, sheet_max[, g_step]); cone scans are the slow part."""
    cache = {}

    def run(delta, plane_n, g_max=1.5, sheet_max=3, g_step=0.01):
        key = (delta, plane_n, g_max, sheet_max, g_step)
        if key not in cache:
            cache[key] = find_cones(ModelParams(1.0, 0.0, delta, 0.0), plane_n, g_max,
                                    sheet_max, g_step=g_step)
        return cache[key]
    return run


@pytest.fixture
def ref_params():
    """The reference point used throughout: w=1, g=0.4, D=0.7, e=0.25."""
    return ModelParams(omega=1.0, g=0.4, delta=0.7, epsilon=0.25)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
