import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hvdc_ofo.grid import build_conductance_blocks
from hvdc_ofo.scenario import bundled, load_scenario, load_topology

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def replica():
    return load_topology(bundled("replica12.grid"))


@pytest.fixture(scope="session")
def replica_blocks(replica):
    return build_conductance_blocks(replica)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def scenario(case, **overrides):
    sc = load_scenario(bundled(f"case_{case}.scn"))
    return sc.with_overrides(**overrides) if overrides else sc


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def acceptance_report():
    def report(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
