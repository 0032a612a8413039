import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kerrcat import TruncatedFockSpace, coherent_state, evolve, preset, stability_dt  # noqa: E402
from kerrcat.fock import annihilation_op, expectation, number_op  # noqa: E402
from kerrcat.propagator import IntegrationPlan  # noqa: E402

ACCEPTANCE_LINES: list[str] = []
# wall-clock seconds of the shared session runs, keyed by fixture name
TIMINGS: dict[str, float] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def moment_observables(dim):
    space = TruncatedFockSpace(dim)
    a = annihilation_op(space)
    a2 = a @ a
    n = number_op(space)
    return {
        "a": lambda tau, rho: expectation(rho, a),
        "a2": lambda tau, rho: expectation(rho, a2),
        "n": lambda tau, rho: expectation(rho, n).real,
    }


def run_model(model, alpha0, dim, chi_tau_end, n_intervals, **kwargs):
    rho0 = coherent_state(alpha0, TruncatedFockSpace(dim)).projector()
    plan = IntegrationPlan.for_samples(chi_tau_end / model.chi, n_intervals, stability_dt(model, dim))
    return evolve(rho0, model, plan, moment_observables(dim), **kwargs)


@pytest.fixture(scope="session")
def dephasing_runs():
    """chi = 0.3 dephasing runs over chi tau in [0, 2 pi], 201 samples, keyed by (alpha0, dim)."""
    start = time.perf_counter()
    model = preset("kerr_dephasing", 0.3)
    runs = {}
    for alpha0 in (1.0, 2.0):
        for dim in (32, 64):
            runs[alpha0, dim] = run_model(
                model, alpha0, dim, 2 * math.pi, 200, store_states=True, track_step_purity=True
            )
    TIMINGS["dephasing_runs"] = time.perf_counter() - start
    return runs


@pytest.fixture(scope="session")
def kerr_ys_run():
    """Pure Kerr to chi tau = pi/2 at |alpha0|^2 = 4, dim 64."""
    start = time.perf_counter()
    model = preset("pure_kerr", 0.3)
    traj = run_model(model, 2.0, 64, 0.5 * math.pi, 10, store_states=True, track_step_purity=True)
    TIMINGS["kerr_ys_run"] = time.perf_counter() - start
    return traj


@pytest.fixture(scope="session")
def fig1_dir(tmp_path_factory):
    from kerrcat.experiments import run_fig1

    out = tmp_path_factory.mktemp("fig1")
    result = run_fig1(out_dir=out)
    return out, result


@pytest.fixture(scope="session")
def chi_sweep():
    from kerrcat.experiments import run_chi_sweep

    start = time.perf_counter()
    res = run_chi_sweep()
    TIMINGS["chi_sweep"] = time.perf_counter() - start
    return res


@pytest.fixture(scope="session")
def damping_contrast():
    from kerrcat.experiments import run_damping_contrast

    start = time.perf_counter()
    res = run_damping_contrast()
    TIMINGS["damping_contrast"] = time.perf_counter() - start
    return res


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
