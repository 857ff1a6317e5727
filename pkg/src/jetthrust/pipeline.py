"""End-to-end workflows: identification, validation and metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .plant import EngineSpec, OmegaUModel, ThrustMap, simulate
from .refine import RefineConfig, RefineDiagnostics, refine_parameters
from .regress import PowerLawFit, fit_power_law, goodness
from .signals import SignalSpec, TimeSeries, smooth_spline_derivatives
from .sindy import SparseModel, assemble_omega_u_model, build_library_B, stlsq

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.2
_DUMMY_MAP = ThrustMap(1.0, 2.0, 0.0)


def identification_schedule() -> list:
    """Default 300 s excitation: idle hold, staircases, sine, chirp and ramp."""
    return [
        SignalSpec("hold", 10.0, level=0.0),
        SignalSpec("staircase", 60.0, start=0.0, stop=100.0, n_levels=6),
        SignalSpec("staircase", 50.0, start=100.0, stop=0.0, n_levels=5),
        SignalSpec("sine", 40.0, offset=50.0, amplitude=40.0, f0=0.2),
        SignalSpec("chirp", 100.0, offset=50.0, amplitude=45.0, f0=0.05, f1=0.5),
        SignalSpec("ramp", 40.0, start=0.0, stop=100.0),
    ]


def validation_schedule() -> list:
    """Held-out 150 s excitation, different levels and frequencies."""
    return [
        SignalSpec("hold", 5.0, level=15.0),
        SignalSpec("step", 20.0, start=15.0, stop=85.0, t_switch=2.0),
        SignalSpec("staircase", 32.0, start=85.0, stop=5.0, n_levels=4),
        SignalSpec("sine", 30.0, offset=45.0, amplitude=35.0, f0=0.1),
        SignalSpec("chirp", 45.0, offset=55.0, amplitude=40.0, f0=0.05, f1=0.5),
        SignalSpec("ramp", 18.0, start=90.0, stop=10.0),
    ]


@dataclass(frozen=True)
class MetricsReport:
    """Absolute and percentage errors against a reference range."""

    mae: float
    mae_pct: float
    max_err: float
    max_err_pct: float
    reference_range: float
    units: str = ""

    def to_dict(self) -> dict:
        return {
            "mae": self.mae, "mae_pct": self.mae_pct, "max_err": self.max_err,
            "max_err_pct": self.max_err_pct, "reference_range": self.reference_range,
            "units": self.units,
        }

    def text(self, label: str = "") -> str:
        head = f"{label}: " if label else ""
        return (f"{head}MAE {self.mae:.4g} {self.units} ({self.mae_pct:.3g}%), "
                f"max {self.max_err:.4g} {self.units} ({self.max_err_pct:.3g}%)")


def metrics(y, y_hat, reference_range: float, scale: float = 1.0, units: str = "") -> MetricsReport:
    """Errors of ``y_hat`` against ``y``, multiplied by ``scale`` for reporting.

    Percentages are taken against ``reference_range`` in the unscaled units.
    """
    if not reference_range > 0:
        raise ValueError("reference range must be positive")
    _, _, mae, max_err = goodness(y, y_hat)
    return MetricsReport(mae * scale, 100.0 * mae / reference_range,
                         max_err * scale, 100.0 * max_err / reference_range,
                         reference_range * scale, units)


def speed_metrics(omega, omega_hat, spec: EngineSpec) -> MetricsReport:
    """Speed errors in RPM, percent of the idle-to-max speed range."""
    return metrics(omega, omega_hat, spec.speed_range, scale=1000.0, units="RPM")


def thrust_metrics(thrust, thrust_hat, spec: EngineSpec) -> MetricsReport:
    """Thrust errors in N, percent of rated (maximum) thrust."""
    return metrics(thrust, thrust_hat, spec.thrust_max, units="N")


def steady_state_points(u, omega, dt: float, min_hold: float = 5.0, average: float = 1.0):
    """Steady-state ``(u, omega)`` pairs from constant-input stretches.

    A stretch qualifies when ``u`` is constant for ``min_hold`` seconds; its
    speed is the mean over the final ``average`` seconds.
    """
    u = np.asarray(u, dtype=float)
    omega = np.asarray(omega, dtype=float)
    change = np.flatnonzero(np.abs(np.diff(u)) > 1e-9) + 1
    bounds = np.concatenate([[0], change, [u.size]])
    n_avg = max(1, int(round(average / dt)))
    xs, ys = [], []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if (hi - lo) * dt < min_hold:
            continue
        xs.append(u[lo])
        ys.append(float(np.mean(omega[hi - n_avg:hi])))
    return np.array(xs), np.array(ys)


def fit_steady_state(u, omega, dt: float, idle: float | None = None) -> PowerLawFit:
    """Fit ``omega = a1*u**b1 + c1`` with ``c1`` held at the idle speed.

    The idle speed is the mean steady speed at ``u = 0`` when the record has
    such a plateau, otherwise ``idle``.
    """
    x, y = steady_state_points(u, omega, dt)
    at_idle = y[x == 0]
    if at_idle.size:
        c1 = float(np.mean(at_idle))
    elif idle is not None:
        c1 = float(idle)
    else:
        raise ValueError("no u = 0 plateau in the record and no idle speed given")
    return fit_power_law(x, y, fix_c=c1)


@dataclass
class IdentificationResult:
    model: OmegaUModel
    sindy_model: OmegaUModel
    sparse: SparseModel
    ss_fit: PowerLawFit | None
    refine: RefineDiagnostics | None = None
    notes: list = field(default_factory=list)


def identify(u: TimeSeries, omega_meas, ss_constants=None, idle: float | None = None,
             threshold: float = DEFAULT_THRESHOLD, quantization_step: float = 0.1,
             smoothing: float | None = None, max_degree: int = 3, refine: bool = True,
             refine_config: RefineConfig | None = None,
             max_passes: int = 5) -> IdentificationResult:
    """Identify the shaft model from an input record and quantized speed.

    Steps: steady-state fit (unless ``ss_constants`` is given), spline
    smoothing and differentiation of the speed, sparse regression over the
    physics-informed library, and optional EKF refinement of the four
    dynamic coefficients.
    """
    omega_meas = np.asarray(omega_meas, dtype=float)
    if omega_meas.size != len(u):
        raise ValueError("u and omega must have equal length")
    n_features = len(build_library_B((1.0, 0.5, 1.0), max_degree))
    if omega_meas.size < 10 * n_features:
        raise ValueError(f"identification needs at least {10 * n_features} samples "
                         f"({n_features} candidate terms), got {omega_meas.size}")
    ss_fit = None
    if ss_constants is None:
        ss_fit = fit_steady_state(u.values, omega_meas, u.dt, idle=idle)
        ss_constants = (ss_fit.a, ss_fit.b, ss_fit.c)
        log.info("steady-state fit a1=%.4f b1=%.4f c1=%.3f R2=%.5f",
                 ss_fit.a, ss_fit.b, ss_fit.c, ss_fit.r_squared)

    series = TimeSeries(u.t0, u.dt, omega_meas, name="omega")
    w, wd, wdd = smooth_spline_derivatives(series, smoothing, quantization_step)
    library = build_library_B(ss_constants, max_degree)
    sparse = stlsq(library, (w.values, wd.values, u.values), wdd.values, threshold=threshold)
    log.info("sparse model: %s", sparse.as_dict())
    sindy_model = assemble_omega_u_model(sparse, ss_constants)

    result = IdentificationResult(sindy_model, sindy_model, sparse, ss_fit,
                                  notes=list(sparse.warnings))
    if refine:
        best, diag = refine_parameters(sindy_model, u, omega_meas, refine_config, max_passes)
        result.model = best
        result.refine = diag
    return result


def validate_model(model: OmegaUModel, u: TimeSeries, omega_meas, spec: EngineSpec) -> MetricsReport:
    """Re-simulate ``model`` on ``u`` and score it against measured speed."""
    sim = simulate(model, _DUMMY_MAP, u)
    return speed_metrics(np.asarray(omega_meas, dtype=float), sim.omega_true, spec)


def failure_window(time, failures):
    """Boolean mask of samples inside any failure (onset to full recovery)."""
    time = np.asarray(time, dtype=float)
    mask = np.zeros(time.size, dtype=bool)
    for ev in failures:
        mask |= (time >= ev.t_start) & (time <= ev.t_recovered)
    return mask
