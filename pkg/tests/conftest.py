import time

import numpy as np
import pytest

from heatblowup.config import ExperimentConfig
from heatblowup.experiments import (analyze_run, build_setup, construct, initial_state,
                                    riccati_solution, run_control)


@pytest.fixture(scope="session")
def default_setup():
    return build_setup(ExperimentConfig().validate())


@pytest.fixture(scope="session")
def constructed(default_setup):
    start = time.perf_counter()
    res = construct(default_setup)
    res.elapsed = time.perf_counter() - start
    return res


@pytest.fixture(scope="session")
def control_run(default_setup, constructed):
    """Default end-to-end run: construct, Lyapunov solve, three phases."""
    start = time.perf_counter()
    sol = riccati_solution(default_setup)
    y0 = initial_state(default_setup, constructed.target)
    res, plan = run_control(default_setup, constructed.target, sol, y0)
    times, states = res.trajectory
    summary, series = analyze_run(default_setup, times, np.array(states), res.phases,
                                  res.sup_series)
    elapsed = time.perf_counter() - start + constructed.elapsed
    return {"result": res, "plan": plan, "summary": summary, "series": series,
            "elapsed": elapsed}


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance lines at the end of the run."""
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
