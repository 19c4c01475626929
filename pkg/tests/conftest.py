import numpy as np
import pytest

from fpsolve.problem import SampledFields


def make_fields(grid, M=1.0, u=0.0, v=0.0, rho0=None, f=0.0, grad=None):
    """SampledFields from constants or arrays (flattened grid order)."""
    n = grid.size

    def arr(a):
        return np.broadcast_to(np.asarray(a, float), (n,)).astype(float, copy=True)

    M = arr(M)
    return SampledFields(
        M=M,
        u=arr(u),
        v=None if grid.dimension == 1 else arr(v),
        rho0=M.copy() if rho0 is None else arr(rho0),
        f=arr(f),
        measure_gradient=grad,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


_CRITERIA = {}


def pytest_runtest_logreport(report):
    mark = getattr(report, "criterion", None)
    if mark is None:
        return
    if report.when == "call" or report.outcome != "passed":
        prev = _CRITERIA.get(mark, "PASS")
        _CRITERIA[mark] = prev if report.outcome == "passed" else "FAIL"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    m = item.get_closest_marker("criterion")
    if m is not None:
        outcome.get_result().criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), status in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
