import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tcmvo import CostSpec, Universe, solve_for_target_vol

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SEVEN_MU = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 7.5, 10.0]) / 100


@pytest.fixture(scope="session")
def seven():
    """Seven assets with mu = vol and constant 25% correlation."""
    return Universe.from_vols(SEVEN_MU, SEVEN_MU, 0.25, names=tuple(f"A{i}" for i in range(1, 8)))


@pytest.fixture(scope="session")
def bidask_costs():
    return CostSpec.broadcast(7, 0.02, 0.01, 0.05, 0.05)


@pytest.fixture(scope="session")
def w_tilde(seven, bidask_costs):
    """Cost-blind optimum at 2% volatility, the starting portfolio of the comparison."""
    return solve_for_target_vol("mvo", seven, bidask_costs, np.full(7, 1 / 7), 0.02,
                                tol=1e-8).w_star


@pytest.fixture(scope="session")
def w_tilde_fixed():
    """Rounded copy of the starting portfolio, used by the frozen oracle values."""
    w = np.array([0.2614, 0.2141, 0.1613, 0.1279, 0.1057, 0.0734, 0.0562])
    return w / w.sum()


# acceptance criteria report: one line per criterion after the run
_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.skipped:
        return
    if rep.when == "call" or rep.failed:
        number, title = mark.args
        ok = _CRITERIA.get(number, (title, True))[1] and rep.passed
        _CRITERIA[number] = (title, ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
