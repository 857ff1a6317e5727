import time

import numpy as np
import pytest

from jetthrust.engines import load_engine
from jetthrust.pipeline import identification_schedule, identify, validation_schedule
from jetthrust.plant import simulate
from jetthrust.signals import generate_schedule

DT = 0.01

# criterion id -> (passed, detail); filled by the acceptance tests
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    def _record(key, passed, detail):
        ACCEPTANCE[key] = (bool(passed), detail)
        return passed
    return _record


@pytest.fixture(scope="session")
def engines():
    return {name: load_engine(name) for name in ("P160", "P220")}


@pytest.fixture(scope="session")
def u_ident():
    return generate_schedule(identification_schedule(), DT)


@pytest.fixture(scope="session")
def u_valid():
    return generate_schedule(validation_schedule(), DT)


@pytest.fixture(scope="session")
def ident_logs(engines, u_ident):
    return {n: simulate(e.model, e.thrust_map, u_ident) for n, e in engines.items()}


@pytest.fixture(scope="session")
def valid_logs(engines, u_valid):
    return {n: simulate(e.model, e.thrust_map, u_valid) for n, e in engines.items()}


@pytest.fixture(scope="session")
def identified(engines, u_ident, ident_logs):
    """Pipeline-identified model per engine, from quantized identification data.

    Maps engine name to ``(IdentificationResult, seconds)``.
    """
    out = {}
    for name, e in engines.items():
        start = time.perf_counter()
        result = identify(u_ident, ident_logs[name].omega_meas, idle=e.spec.omega_idle)
        out[name] = (result, time.perf_counter() - start)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(0)
