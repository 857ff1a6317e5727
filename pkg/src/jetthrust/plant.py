"""Synthetic turbojet: shaft-speed dynamics, thrust map and failure injection.

Units throughout: omega in kRPM, omega_dot in kRPM/s, u dimensionless in
[0, 100], thrust in N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .signals import TimeSeries, quantize_values


class SimulationDiverged(RuntimeError):
    pass


def _pow_u(u: float, b: float) -> float:
    # 0**b is the continuous limit, never NaN
    return 0.0 if u <= 0.0 else u**b


def _check_u(u: float) -> None:
    if not 0.0 <= u <= 100.0:
        raise ValueError(f"input u={u} outside [0, 100]")


@dataclass(frozen=True)
class OmegaUModel:
    """Second-order shaft-speed model anchored on the steady-state map.

    ``omega_ddot = K_ss*(omega - a1*u**b1 - c1)
                   + (K_d + K_wd*omega + K_wwd*omega**2) * omega_dot``
    """

    a1: float
    b1: float
    c1: float
    K_ss: float
    K_d: float
    K_wd: float = 0.0
    K_wwd: float = 0.0
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        if not self.check:
            return
        if not (self.c1 > 0 and self.a1 > 0 and 0 < self.b1 < 1):
            raise ValueError(
                f"steady-state constants out of range: a1={self.a1}, b1={self.b1}, c1={self.c1}"
            )
        if not self.K_ss < 0:
            raise ValueError(f"K_ss must be negative, got {self.K_ss}")
        w = np.linspace(self.c1, self.omega_max, 201)
        damping = self.damping(w)
        if np.any(damping >= 0):
            bad = w[np.argmax(damping)]
            raise ValueError(
                f"damping K_d + K_wd*w + K_wwd*w^2 is non-negative at w={bad:.2f} kRPM"
            )

    @property
    def omega_max(self) -> float:
        return self.a1 * 100.0**self.b1 + self.c1

    def damping(self, omega):
        return self.K_d + self.K_wd * omega + self.K_wwd * omega**2

    def coefficients(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "check"}

    def replace(self, **changes) -> "OmegaUModel":
        d = self.coefficients()
        d.update(changes)
        return OmegaUModel(**d)


@dataclass(frozen=True)
class ThrustMap:
    """Static thrust map ``T = a2 * omega**b2 + c2``."""

    a2: float
    b2: float
    c2: float

    def __post_init__(self):
        if not (self.a2 > 0 and self.b2 > 1):
            raise ValueError(f"thrust map needs a2 > 0 and b2 > 1, got a2={self.a2}, b2={self.b2}")


@dataclass(frozen=True)
class EngineSpec:
    name: str
    omega_idle: float
    omega_max: float
    thrust_idle: float
    thrust_max: float

    def __post_init__(self):
        if not self.omega_idle < self.omega_max:
            raise ValueError("omega_idle must be below omega_max")
        if not self.thrust_idle < self.thrust_max:
            raise ValueError("thrust_idle must be below thrust_max")

    @property
    def speed_range(self) -> float:
        return self.omega_max - self.omega_idle


@dataclass(frozen=True)
class FailureEvent:
    """Temporary loss of idle constant in the plant (fuel-line air bubbles).

    The effective ``c1`` falls linearly by ``c1_drop`` over the first 10% of
    ``duration``, holds, and then climbs back at ``recovery_rate``.
    """

    t_start: float
    duration: float
    c1_drop: float
    recovery_rate: float = 2.0

    def __post_init__(self):
        if self.c1_drop < 0:
            raise ValueError("c1_drop must be non-negative")
        if not self.duration > 0:
            raise ValueError("failure duration must be positive")
        if not self.recovery_rate > 0:
            raise ValueError("recovery_rate must be positive")

    @property
    def t_recovered(self) -> float:
        return self.t_start + self.duration + self.c1_drop / self.recovery_rate

    def drop_at(self, t: float) -> float:
        tau = t - self.t_start
        if tau <= 0:
            return 0.0
        ramp = 0.1 * self.duration
        if tau < ramp:
            return self.c1_drop * tau / ramp
        if tau <= self.duration:
            return self.c1_drop
        return max(0.0, self.c1_drop - self.recovery_rate * (tau - self.duration))

    @classmethod
    def from_dict(cls, d: dict) -> "FailureEvent":
        return cls(**d)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def effective_c1(c1: float, failures: Sequence[FailureEvent], t: float) -> float:
    drop = sum(ev.drop_at(t) for ev in failures)
    return max(0.0, c1 - drop)


@dataclass(frozen=True)
class PlantState:
    omega: float
    omega_dot: float
    c1_eff: float
    t: float


def eval_dynamics(model: OmegaUModel, omega: float, omega_dot: float, u: float,
                  c1_override: float | None = None) -> float:
    """Shaft acceleration in kRPM/s^2. ``c1_override`` replaces the idle constant."""
    _check_u(u)
    c1 = model.c1 if c1_override is None else c1_override
    return (model.K_ss * (omega - model.a1 * _pow_u(u, model.b1) - c1)
            + (model.K_d + model.K_wd * omega + model.K_wwd * omega * omega) * omega_dot)


def steady_state_omega(model: OmegaUModel, u: float) -> float:
    _check_u(u)
    return model.a1 * _pow_u(u, model.b1) + model.c1


def thrust(tmap: ThrustMap, omega):
    """Thrust in N. Accepts scalars or arrays of positive speeds."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("thrust map needs omega > 0")
    out = tmap.a2 * w**tmap.b2 + tmap.c2
    return float(out) if out.ndim == 0 else out


def thrust_rate(tmap: ThrustMap, omega, omega_dot):
    """Time derivative of thrust by the chain rule, in N/s."""
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("thrust map needs omega > 0")
    out = tmap.a2 * tmap.b2 * w ** (tmap.b2 - 1.0) * np.asarray(omega_dot, dtype=float)
    return float(out) if out.ndim == 0 else out


SIMULATION_COLUMNS = ("time", "u", "omega_true", "omega_dot_true", "omega_meas", "thrust_true")


@dataclass
class SimulationLog:
    """Plant output sampled on the input grid.

    ``omega_ddot_true`` and ``c1_eff`` are the exact acceleration and the
    effective idle constant at each sample; they are kept in memory only and
    are not part of the CSV layout.
    """

    time: np.ndarray
    u: np.ndarray
    omega_true: np.ndarray
    omega_dot_true: np.ndarray
    omega_ddot_true: np.ndarray
    omega_meas: np.ndarray
    thrust_true: np.ndarray
    c1_eff: np.ndarray
    dt: float

    def __len__(self) -> int:
        return self.time.size

    def columns(self) -> dict:
        return {name: getattr(self, name) for name in SIMULATION_COLUMNS}

    def series(self, name: str) -> TimeSeries:
        return TimeSeries(float(self.time[0]), self.dt, getattr(self, name), name=name)


def simulate(model: OmegaUModel, tmap: ThrustMap, u: TimeSeries,
             failures: Sequence[FailureEvent] = (), integrator_dt: float = 1e-3,
             quantization_step: float = 0.1, omega_noise_std: float = 0.0,
             seed: int = 0, omega0: float | None = None) -> SimulationLog:
    """Integrate the plant with classical RK4 and a zero-order hold on ``u``.

    The engine starts at the steady state for ``u[0]`` unless ``omega0`` is
    given. Measurements are ``quantize(omega + noise, quantization_step)``;
    the noise is Gaussian with ``omega_noise_std`` drawn from ``seed``.
    """
    if integrator_dt > u.dt * (1 + 1e-9):
        raise ValueError(f"integrator_dt={integrator_dt} exceeds input step {u.dt}")
    uv = u.values
    if np.any(uv < 0) or np.any(uv > 100):
        raise ValueError("input u outside [0, 100]")
    n_sub = max(1, int(round(u.dt / integrator_dt)))
    h = u.dt / n_sub
    n = len(u)
    failures = tuple(failures)

    a1, b1 = model.a1, model.b1
    K_ss, K_d, K_wd, K_wwd = model.K_ss, model.K_d, model.K_wd, model.K_wwd
    limit = 10.0 * model.omega_max
    t0 = u.t0

    def c1_at(t):
        return effective_c1(model.c1, failures, t) if failures else model.c1

    def acc(w, wd, target):
        return K_ss * (w - target) + (K_d + K_wd * w + K_wwd * w * w) * wd

    omega = (a1 * _pow_u(uv[0], b1) + c1_at(t0)) if omega0 is None else float(omega0)
    omega_dot = 0.0

    w_out = np.empty(n)
    wd_out = np.empty(n)
    wdd_out = np.empty(n)
    c1_out = np.empty(n)
    for k in range(n):
        t = t0 + k * u.dt
        ss_u = a1 * _pow_u(uv[k], b1)
        c1_now = c1_at(t)
        w_out[k] = omega
        wd_out[k] = omega_dot
        wdd_out[k] = acc(omega, omega_dot, ss_u + c1_now)
        c1_out[k] = c1_now
        if k == n - 1:
            break
        for j in range(n_sub):
            ts = t + j * h
            if failures:
                tgt1 = ss_u + c1_at(ts)
                tgt2 = ss_u + c1_at(ts + 0.5 * h)
                tgt3 = ss_u + c1_at(ts + h)
            else:
                tgt1 = tgt2 = tgt3 = ss_u + c1_now
            k1w, k1v = omega_dot, acc(omega, omega_dot, tgt1)
            w2, v2 = omega + 0.5 * h * k1w, omega_dot + 0.5 * h * k1v
            k2w, k2v = v2, acc(w2, v2, tgt2)
            w3, v3 = omega + 0.5 * h * k2w, omega_dot + 0.5 * h * k2v
            k3w, k3v = v3, acc(w3, v3, tgt2)
            w4, v4 = omega + h * k3w, omega_dot + h * k3v
            k4w, k4v = v4, acc(w4, v4, tgt3)
            omega += h / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w)
            omega_dot += h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        if not (math.isfinite(omega) and math.isfinite(omega_dot)) or abs(omega) > limit:
            raise SimulationDiverged(
                f"plant diverged at t={t + u.dt:.3f} s: omega={omega}, omega_dot={omega_dot}"
            )

    if omega_noise_std > 0:
        rng = np.random.default_rng(seed)
        noisy = w_out + rng.normal(0.0, omega_noise_std, n)
    else:
        noisy = w_out
    return SimulationLog(
        time=u.time,
        u=np.array(uv, dtype=float),
        omega_true=w_out,
        omega_dot_true=wd_out,
        omega_ddot_true=wdd_out,
        omega_meas=quantize_values(noisy, quantization_step),
        thrust_true=thrust(tmap, w_out),
        c1_eff=c1_out,
        dt=u.dt,
    )
