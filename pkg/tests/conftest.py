from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from bihermitian.backends import flat_torus_metric
from bihermitian.grid import GridSpec
from bihermitian.hopf import k_profile

settings.register_profile("repo", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def torus8():
    return GridSpec.torus(8)


@pytest.fixture(scope="session")
def flat8(torus8):
    return flat_torus_metric(torus8)


@pytest.fixture(scope="session")
def hopf_grid():
    # (alpha, beta) = (1, 2), half width 12
    return GridSpec.hopf(1.0, 2.0, 1024, 32, 12.0)


@pytest.fixture(scope="session")
def hopf_profile(hopf_grid):
    return k_profile(1.0, 2.0, hopf_grid)


@pytest.fixture(scope="session")
def small_hopf():
    return GridSpec.hopf(1.0, 2.0, 256, 16, 8.0)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for name, m in list(sys.modules.items())
                if name.endswith("test_acceptance") and hasattr(m, "RESULTS")), None)
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(mod.RESULTS, key=lambda k: int(k[1:])):
        terminalreporter.write_line(mod.RESULTS[name].line())
