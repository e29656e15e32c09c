from functools import lru_cache
from itertools import islice

import pytest

from qtrg.scenario import BUILTIN_SCENARIOS, ScenarioSeries
from qtrg.trigger import indicator_series

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []


@lru_cache(maxsize=None)
def exact_trajectory(name: str, last_step: int) -> tuple:
    """Exact indicator at recorded steps 0..last_step of a builtin scenario."""
    series = ScenarioSeries(BUILTIN_SCENARIOS[name])
    points = indicator_series(series, cadence=series.substeps, exact=True)
    return tuple(islice(points, last_step + 1))


@pytest.fixture(scope="session")
def hcci():
    return BUILTIN_SCENARIOS["hcci_t40_like"]


@pytest.fixture(scope="session")
def tiny():
    return BUILTIN_SCENARIOS["tiny"]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
