"""Thrust observer: 3-state EKF on (omega, omega_dot, c1) plus the thrust map.

The idle constant ``c1`` is carried as a state with a first-order pull back
to its nominal value. When the engine loses speed for reasons the model does
not know about (fuel-line air bubbles), the filter lowers ``c1`` instead of
fighting the measurements, which keeps the estimates smooth and unbiased.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

import numpy as np

from .ekf import EkfInstance, ekf_step, linear_measurement
from .io import ConfigError, uniform_step
from .plant import OmegaUModel, ThrustMap, eval_dynamics, thrust, thrust_rate

QUANT_VARIANCE = (0.1 / math.sqrt(12.0)) ** 2

ESTIMATE_COLUMNS = ("time", "u", "omega_meas", "omega_hat", "omega_dot_hat", "c1_hat",
                    "thrust_hat", "thrust_rate_hat")


@dataclass(frozen=True)
class ObserverConfig:
    """Observer tuning.

    ``q_*`` are per-sample process-noise variances, ``r`` the measurement
    variance in kRPM^2 and ``p0_*`` the initial covariance diagonal.
    ``K_c1 = inf`` pins the idle state to ``c1_nominal`` (no c1 tracking).
    """

    c1_nominal: float
    K_c1: float = 0.05
    q_omega: float = 0.0
    q_omega_dot: float = 1e-3
    q_c1: float = 1e-2
    r: float = QUANT_VARIANCE
    p0_omega: float = QUANT_VARIANCE
    p0_omega_dot: float = 10.0
    p0_c1: float = 1.0
    c1_min: float = 1.0

    def __post_init__(self):
        if self.K_c1 < 0:
            raise ValueError("K_c1 must be non-negative")
        if self.c1_nominal <= 0:
            raise ValueError("c1_nominal must be positive")
        if self.r <= 0:
            raise ValueError("measurement variance r must be positive")
        for name in ("q_omega", "q_omega_dot", "q_c1", "p0_omega", "p0_omega_dot", "p0_c1"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def c1_max(self) -> float:
        return 2.0 * self.c1_nominal

    @property
    def tracks_c1(self) -> bool:
        return math.isfinite(self.K_c1)

    def frozen_c1(self) -> "ObserverConfig":
        """Same tuning with the idle state pinned to nominal (stiff-pull limit)."""
        return replace(self, K_c1=math.inf, q_c1=0.0, p0_c1=0.0)

    @classmethod
    def from_dict(cls, d: dict, source: str = "observer config") -> "ObserverConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"{source}: unknown key(s) {', '.join(unknown)}")
        try:
            return cls(**{k: float(v) for k, v in d.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: {exc}") from exc

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class ThrustObserverState:
    omega: float
    omega_dot: float
    c1_online: float


@dataclass(frozen=True)
class ObserverState:
    """Observer mean and covariance."""

    x: np.ndarray
    P: np.ndarray

    @property
    def estimate(self) -> ThrustObserverState:
        return ThrustObserverState(*map(float, self.x))


def initial_state(omega_meas0: float, config: ObserverConfig) -> ObserverState:
    x = np.array([omega_meas0, 0.0, config.c1_nominal])
    P = np.diag([config.p0_omega, config.p0_omega_dot, config.p0_c1])
    return ObserverState(x, P)


def transition(model: OmegaUModel, config: ObserverConfig, dt: float):
    """Euler-discretized observer transition ``x_next = f(x, u)``."""
    c1n = config.c1_nominal
    K = config.K_c1
    pinned = not config.tracks_c1

    def f(x, u):
        w, wd, c1 = x
        acc = eval_dynamics(model, w, wd, u, c1_override=c1)
        c1_next = np.full_like(c1, c1n) if pinned else c1 - K * (c1 - c1n) * dt
        return np.array([w + wd * dt, wd + acc * dt, c1_next])

    return f


_MEASURE_OMEGA = linear_measurement(0)


def observer_step(state: ObserverState, u: float, omega_meas: float, model: OmegaUModel,
                  tmap: ThrustMap, config: ObserverConfig, dt: float = 0.01):
    """Advance one sample: predict with ``u``, correct with ``omega_meas``.

    Returns ``(new_state, thrust, thrust_rate)`` where thrust and its rate
    come from the thrust map evaluated at the corrected estimate.
    """
    inst = EkfInstance(state.x, state.P, _process_noise(config), np.array([[config.r]]), dt)
    inst = ekf_step(inst, transition(model, config, dt), _MEASURE_OMEGA, u, omega_meas,
                    vectorized=True)
    x = inst.x.copy()
    x[2] = min(max(x[2], config.c1_min), config.c1_max)
    new = ObserverState(x, inst.P)
    return new, _thrust(tmap, x[0]), _thrust_rate(tmap, x[0], x[1])


def _process_noise(config: ObserverConfig) -> np.ndarray:
    return np.diag([config.q_omega, config.q_omega_dot, config.q_c1])


def _thrust(tmap, omega):
    return thrust(tmap, max(omega, 1e-9))


def _thrust_rate(tmap, omega, omega_dot):
    return thrust_rate(tmap, max(omega, 1e-9), omega_dot)


@dataclass
class EstimateLog:
    time: np.ndarray
    u: np.ndarray
    omega_meas: np.ndarray
    omega_hat: np.ndarray
    omega_dot_hat: np.ndarray
    c1_hat: np.ndarray
    thrust_hat: np.ndarray
    thrust_rate_hat: np.ndarray

    def __len__(self) -> int:
        return self.time.size

    def columns(self) -> dict:
        return {name: getattr(self, name) for name in ESTIMATE_COLUMNS}


def run_observer(time, u, omega_meas, model: OmegaUModel, tmap: ThrustMap,
                 config: ObserverConfig) -> EstimateLog:
    """Stream the observer over a uniformly sampled record.

    The first sample initializes the state (``omega_hat = omega_meas[0]``,
    zero rate, nominal ``c1``); each later sample is one ``observer_step``
    driven by the previous input.
    """
    time = np.asarray(time, dtype=float)
    u = np.asarray(u, dtype=float)
    omega_meas = np.asarray(omega_meas, dtype=float)
    n = time.size
    if not (u.size == n and omega_meas.size == n):
        raise ValueError("time, u and omega_meas must have equal length")
    out = np.empty((5, n))
    if n == 0:
        return EstimateLog(time, u, omega_meas, *out)
    dt = uniform_step(time) if n > 1 else 0.01

    state = initial_state(float(omega_meas[0]), config)
    out[:, 0] = [state.x[0], state.x[1], state.x[2],
                 _thrust(tmap, state.x[0]), _thrust_rate(tmap, state.x[0], state.x[1])]
    for k in range(1, n):
        state, T, Td = observer_step(state, float(u[k - 1]), float(omega_meas[k]),
                                     model, tmap, config, dt)
        out[:, k] = [state.x[0], state.x[1], state.x[2], T, Td]
    return EstimateLog(time, u, omega_meas, *out)
