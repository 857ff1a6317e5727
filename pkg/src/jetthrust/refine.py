"""Refinement of the shaft-model coefficients with a parameter-augmented EKF.

The filter state is ``[omega, omega_dot, K_ss, K_d, K_wd, K_wwd]``; the four
coefficients follow random walks so the filter can move them. The dataset is
replayed pass after pass, each pass starting from the previous pass's final
coefficients. After every pass the plant is re-simulated with the new
coefficients and scored against the measurements; refinement stops as soon
as the mean absolute error fails to improve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .ekf import EkfError, EkfInstance, ekf_step, linear_measurement
from .plant import OmegaUModel, SimulationDiverged, ThrustMap, simulate
from .regress import goodness
from .signals import TimeSeries

log = logging.getLogger(__name__)

PARAMS = ("K_ss", "K_d", "K_wd", "K_wwd")
PARAM_LIMIT = 1e4

# thrust plays no part here; simulate() just needs a valid map
_DUMMY_MAP = ThrustMap(1.0, 2.0, 0.0)


@dataclass(frozen=True)
class RefineConfig:
    """Noise settings for the augmented filter.

    ``q_params_rel`` is the per-sample random-walk standard deviation of each
    coefficient as a fraction of its magnitude; ``p0_params_rel`` likewise
    for the initial spread.
    """

    q_omega_dot: float = 1e-3
    q_params_rel: float = 2e-4
    r: float = (0.1 / math.sqrt(12.0)) ** 2
    p0_omega_dot: float = 1.0
    p0_params_rel: float = 0.1


@dataclass
class RefineDiagnostics:
    mae_history: list = field(default_factory=list)
    max_err_history: list = field(default_factory=list)
    models: list = field(default_factory=list)
    best_pass: int = 0
    stop_reason: str = ""


def _transition(model0: OmegaUModel, dt: float):
    a1, b1, c1 = model0.a1, model0.b1, model0.c1

    def f(x, u):
        w, wd, kss, kd, kwd, kwwd = x
        target = a1 * (u**b1 if u > 0 else 0.0) + c1
        acc = kss * (w - target) + (kd + kwd * w + kwwd * w * w) * wd
        return np.array([w + wd * dt, wd + acc * dt, kss, kd, kwd, kwwd])

    return f


def _score(model: OmegaUModel, u: TimeSeries, omega_meas: np.ndarray):
    sim = simulate(model, _DUMMY_MAP, u)
    _, _, mae, max_err = goodness(omega_meas, sim.omega_true)
    return mae, max_err


def _run_pass(model: OmegaUModel, u: TimeSeries, omega_meas: np.ndarray,
              config: RefineConfig) -> OmegaUModel:
    theta = np.array([getattr(model, p) for p in PARAMS])
    scale = np.maximum(np.abs(theta), 1e-6)
    x0 = np.concatenate([[omega_meas[0], 0.0], theta])
    P0 = np.diag(np.concatenate([[config.r, config.p0_omega_dot],
                                 (config.p0_params_rel * scale) ** 2]))
    Q = np.diag(np.concatenate([[0.0, config.q_omega_dot], (config.q_params_rel * scale) ** 2]))
    inst = EkfInstance(x0, P0, Q, np.array([[config.r]]), u.dt)
    f = _transition(model, u.dt)
    h = linear_measurement(0)
    uv = u.values
    for k in range(1, len(u)):
        inst = ekf_step(inst, f, h, float(uv[k - 1]), omega_meas[k], vectorized=True)
        if np.any(np.abs(inst.x[2:]) > PARAM_LIMIT):
            raise EkfError(f"coefficients diverged at sample {k}: {inst.x[2:]}")
    return model.replace(**dict(zip(PARAMS, map(float, inst.x[2:]))))


def refine_parameters(model0: OmegaUModel, u: TimeSeries, omega_meas,
                      config: RefineConfig | None = None, max_passes: int = 5):
    """Tune ``K_ss, K_d, K_wd, K_wwd`` of ``model0`` on a (u, omega_meas) record.

    Returns ``(best_model, diagnostics)``. ``diagnostics.mae_history[0]`` is
    the score of ``model0``; entry ``i`` is the score after pass ``i``.
    """
    config = config or RefineConfig()
    omega_meas = np.asarray(omega_meas, dtype=float)
    if omega_meas.size != len(u):
        raise ValueError("u and omega_meas must have equal length")

    diag = RefineDiagnostics()
    mae, max_err = _score(model0, u, omega_meas)
    diag.mae_history.append(mae)
    diag.max_err_history.append(max_err)
    diag.models.append(model0)
    best, best_mae = model0, mae
    current = model0
    diag.stop_reason = "max_passes"
    for i in range(1, max_passes + 1):
        try:
            candidate = _run_pass(current, u, omega_meas, config)
            candidate = OmegaUModel(**candidate.coefficients())  # re-checks stability
            mae, max_err = _score(candidate, u, omega_meas)
        except (EkfError, SimulationDiverged, ValueError) as exc:
            log.warning("refinement pass %d aborted: %s", i, exc)
            diag.stop_reason = f"diverged: {exc}"
            break
        diag.mae_history.append(mae)
        diag.max_err_history.append(max_err)
        diag.models.append(candidate)
        log.info("refinement pass %d: MAE %.4f kRPM, max %.3f kRPM", i, mae, max_err)
        if mae >= best_mae:
            diag.stop_reason = "mae stopped decreasing"
            break
        best, best_mae, diag.best_pass = candidate, mae, i
        current = candidate
    return best, diag
