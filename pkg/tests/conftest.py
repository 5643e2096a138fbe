"""Session fixtures: each acceptance scenario is simulated exactly once."""

import time

import numpy as np
import pytest

from satpbc import scenarios as scn_mod


class TimedTrace:
    def __init__(self, scenario, trace, wall):
        self.scenario = scenario
        self.trace = trace
        self.wall = wall


def _run(name, **overrides):
    scn = scn_mod.builtin_scenarios()[name]
    for key, value in overrides.items():
        scn = scn_mod.apply_override(scn, key, value)
    t0 = time.perf_counter()
    trace = scn_mod.run_scenario(scn)
    return TimedTrace(scn, trace, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def rlc_run():
    return _run("rlc-default")


@pytest.fixture(scope="session")
def coupling_runs():
    runs = {"i": _run("coupling-device-i"), "ii": _run("coupling-device-ii")}
    runs["a3.75"] = _run("coupling-device-ii", alpha=3.75)
    runs["a5"] = _run("coupling-device-ii", alpha=5.0)
    return runs


@pytest.fixture(scope="session")
def pera_nominal_run():
    return _run("pera-nominal")


@pytest.fixture(scope="session")
def pera_bias_runs():
    return {
        "filtered": _run("pera-filtered-bias"),
        "nominal": _run("pera-nominal-bias"),
    }


@pytest.fixture(scope="session")
def registry():
    return scn_mod.builtin_scenarios()


def target_of(run):
    return np.asarray(run.scenario.target, dtype=float)
