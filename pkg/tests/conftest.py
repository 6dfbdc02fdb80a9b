import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from contactgb import Box, Disk, builtin_model, make_chart

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SCENARIOS = os.path.join(ROOT, "scenarios")


def scenario_path(name):
    return os.path.join(SCENARIOS, name)


@pytest.fixture(scope="session")
def heis():
    return builtin_model("heisenberg")


@pytest.fixture(scope="session")
def plane_chart():
    return make_chart(("u", "v", "0"), Disk(0.0, 0.0, 2.5))


@pytest.fixture(scope="session")
def polar_chart():
    # (r, theta) chart of the horizontal plane, away from the origin
    return make_chart(("u*cos(v)", "u*sin(v)", "0"), Box(0.01, 3.0, -np.pi, np.pi))


@pytest.fixture(scope="session")
def sphere():
    from contactgb.scenario import load_scenario
    return load_scenario(scenario_path("heisenberg_sphere.scn"))


@pytest.fixture(scope="session")
def plane_scenario():
    from contactgb.scenario import load_scenario
    return load_scenario(scenario_path("heisenberg_plane.scn"))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
