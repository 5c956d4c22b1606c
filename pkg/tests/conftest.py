"""Shared solver runs.  Every long run is computed once per session."""
from __future__ import annotations

import time

import numpy as np
import pytest

from pmfrontier.grid import GridGeom
from pmfrontier.lv import Barrier, LVSubParams, LVSupParams, integrate
from pmfrontier.model import ModelSpec
from pmfrontier.verify import barrier_run, decay_series, experiment_pme_convergence

STD_H = 0.02
STD_T_END = 20.0
SNAPSHOT_DT = 0.25


@pytest.fixture(scope="session")
def timings():
    """Wall-clock seconds of the shared runs, keyed by fixture name."""
    return {}


@pytest.fixture(scope="session")
def tumor():
    return ModelSpec.tumor(m=2.0, p_m=1.0)


@pytest.fixture(scope="session")
def fisher():
    return ModelSpec.fisher_kpp(m=2.0)


@pytest.fixture(scope="session")
def sub_params(tumor):
    return LVSubParams.from_model(tumor, 2, 0.5, 0.1)


@pytest.fixture(scope="session")
def sup_params(tumor):
    return LVSupParams.from_model(tumor, 2, 0.7, 0.05)


@pytest.fixture(scope="session")
def sub_barrier(sub_params):
    return Barrier(integrate(sub_params, STD_T_END))


@pytest.fixture(scope="session")
def sup_barrier(sup_params):
    return Barrier(integrate(sup_params, STD_T_END))


@pytest.fixture(scope="session")
def standard_runs(tumor, sub_barrier, timings):
    """The standard tumor run at h and h/2, keyed by h."""
    out = {}
    start = time.perf_counter()
    for h in (STD_H, STD_H / 2):
        out[h] = barrier_run(tumor, GridGeom.radial(h, 20.0, 2), sub_barrier, STD_T_END, SNAPSHOT_DT)
    timings["standard_runs"] = time.perf_counter() - start
    return out


@pytest.fixture(scope="session")
def standard_run(standard_runs):
    return standard_runs[STD_H]


@pytest.fixture(scope="session")
def sup_run(tumor, sup_barrier, timings):
    start = time.perf_counter()
    res = barrier_run(tumor, GridGeom.radial(STD_H, 24.0, 2), sup_barrier, STD_T_END, SNAPSHOT_DT)
    timings["sup_run"] = time.perf_counter() - start
    return res


@pytest.fixture(scope="session")
def decay_run(tumor, sub_params, timings):
    """Long coarse run for the late-time gap; the barrier is sampled once at t = 0."""
    start = time.perf_counter()
    b = Barrier(integrate(sub_params, 400.0, 1e-2))
    res = barrier_run(tumor, GridGeom.radial(0.1, 320.0, 2), b, 400.0, 1.0)
    timings["decay_run"] = time.perf_counter() - start
    return res


@pytest.fixture(scope="session")
def decay_gap(decay_run, tumor):
    return decay_series(decay_run, tumor, 1.0)


@pytest.fixture(scope="session")
def pme_table(timings):
    start = time.perf_counter()
    tab = experiment_pme_convergence(2, 2.0, 1.0, (0.04, 0.02, 0.01), t0=1.0, t1=2.0, extent=6.0)
    timings["pme_table"] = time.perf_counter() - start
    return tab


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
