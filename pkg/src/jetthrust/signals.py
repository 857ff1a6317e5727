"""Input signals, quantization, smoothing and numerical differentiation.

Everything here operates on :class:`TimeSeries`, a uniformly sampled scalar
channel. All functions are pure and return new series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import UnivariateSpline
from scipy.signal import savgol_filter

U_MIN = 0.0
U_MAX = 100.0

SIGNAL_KINDS = ("step", "staircase", "sine", "chirp", "ramp", "hold")


@dataclass(frozen=True)
class TimeSeries:
    """Uniformly sampled scalar channel.

    Sample ``k`` sits at ``t0 + k * dt``. ``values`` is stored as a read-only
    float array so a series can be shared freely.
    """

    t0: float
    dt: float
    values: np.ndarray
    name: str = "value"

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if not self.dt > 0 or not math.isfinite(self.dt):
            raise ValueError(f"dt must be a positive finite number, got {self.dt}")
        if values.size == 0:
            raise ValueError("TimeSeries needs at least one sample")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"TimeSeries {self.name!r} contains non-finite samples")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size

    @property
    def time(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.values.size)

    @property
    def duration(self) -> float:
        return self.dt * self.values.size

    def with_values(self, values, name: str | None = None) -> "TimeSeries":
        return TimeSeries(self.t0, self.dt, values, self.name if name is None else name)


@dataclass(frozen=True)
class SignalSpec:
    """Description of one segment of an excitation signal for ``u``.

    Which fields matter depends on ``kind``:

    ========== ===============================================================
    step       ``start`` before ``t_switch`` (segment-relative), ``stop`` after
    staircase  ``n_levels`` equal-length plateaus from ``start`` to ``stop``
    sine       ``offset + amplitude * sin(2 pi f0 t)``
    chirp      linear sweep from ``f0`` to ``f1`` over the segment
    ramp       linear from ``start`` to ``stop``
    hold       constant ``level``
    ========== ===============================================================
    """

    kind: str
    duration: float
    start: float = 0.0
    stop: float = 0.0
    level: float = 0.0
    offset: float = 50.0
    amplitude: float = 0.0
    f0: float = 0.05
    f1: float = 0.5
    t_switch: float = 0.0
    n_levels: int = 2
    f_bounds: tuple[float, float] = field(default=(0.05, 0.5))

    @classmethod
    def from_dict(cls, d: dict) -> "SignalSpec":
        d = dict(d)
        if "f_bounds" in d:
            d["f_bounds"] = tuple(d["f_bounds"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown SignalSpec keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["f_bounds"] = list(self.f_bounds)
        return d


def _check_spec(spec: SignalSpec, dt: float) -> None:
    if spec.kind not in SIGNAL_KINDS:
        raise ValueError(f"unknown signal kind {spec.kind!r}; expected one of {SIGNAL_KINDS}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not spec.duration > 0:
        raise ValueError(f"{spec.kind}: duration must be positive, got {spec.duration}")
    nyquist = 0.5 / dt
    if spec.kind in ("sine", "chirp"):
        freqs = [spec.f0] if spec.kind == "sine" else [spec.f0, spec.f1]
        for f in freqs:
            if not 0 < f < nyquist:
                raise ValueError(
                    f"{spec.kind}: frequency {f} Hz outside (0, {nyquist}) Hz (Nyquist)"
                )
    if spec.kind == "chirp":
        lo, hi = spec.f_bounds
        for f in (spec.f0, spec.f1):
            if not lo - 1e-12 <= f <= hi + 1e-12:
                raise ValueError(f"chirp: frequency {f} Hz outside bounds [{lo}, {hi}] Hz")
    if spec.kind == "staircase" and spec.n_levels < 1:
        raise ValueError("staircase: n_levels must be >= 1")


def generate(spec: SignalSpec, dt: float, t0: float = 0.0) -> TimeSeries:
    """Sample one signal segment at step ``dt``. Values are clamped to [0, 100]."""
    _check_spec(spec, dt)
    n = max(1, int(round(spec.duration / dt)))
    t = dt * np.arange(n)
    kind = spec.kind
    if kind == "hold":
        u = np.full(n, float(spec.level))
    elif kind == "step":
        u = np.where(t < spec.t_switch - 1e-9 * dt, spec.start, spec.stop).astype(float)
    elif kind == "staircase":
        levels = np.linspace(spec.start, spec.stop, spec.n_levels)
        idx = np.minimum((t / spec.duration * spec.n_levels + 1e-9).astype(int), spec.n_levels - 1)
        u = levels[idx]
    elif kind == "ramp":
        u = spec.start + (spec.stop - spec.start) * t / spec.duration
    elif kind == "sine":
        u = spec.offset + spec.amplitude * np.sin(2 * np.pi * spec.f0 * t)
    else:  # chirp
        rate = (spec.f1 - spec.f0) / spec.duration
        phase = 2 * np.pi * (spec.f0 * t + 0.5 * rate * t**2)
        u = spec.offset + spec.amplitude * np.sin(phase)
    return TimeSeries(t0, dt, np.clip(u, U_MIN, U_MAX), name="u")


def generate_schedule(specs: Sequence[SignalSpec], dt: float) -> TimeSeries:
    """Concatenate segments into one input record starting at t = 0."""
    if not specs:
        raise ValueError("empty signal schedule")
    parts = [generate(s, dt).values for s in specs]
    return TimeSeries(0.0, dt, np.concatenate(parts), name="u")


def quantize(series: TimeSeries, step: float) -> TimeSeries:
    """Round every sample to the nearest multiple of ``step`` (ties away from zero)."""
    return series.with_values(quantize_values(series.values, step))


def quantize_values(values, step: float) -> np.ndarray:
    if not step > 0:
        raise ValueError(f"quantization step must be positive, got {step}")
    x = np.asarray(values, dtype=float)
    r = np.abs(x) / step
    # values a few ulps below a tie count as the tie: 35.05 / 0.1 == 350.4999...
    k = np.floor(r + 0.5 + 1e-9 * np.maximum(1.0, r))
    return np.sign(x) * k * step


def savitzky_golay(series: TimeSeries, window: int = 21, degree: int = 3,
                   deriv_order: int = 0) -> TimeSeries:
    """Savitzky-Golay smoothing or differentiation.

    Edges use a polynomial fitted over the first/last full window, so the
    output is aligned with the input sample for sample.
    """
    if window % 2 == 0:
        raise ValueError(f"window must be odd, got {window}")
    if window > len(series):
        raise ValueError(f"window {window} longer than series ({len(series)} samples)")
    if deriv_order not in (0, 1, 2):
        raise ValueError("deriv_order must be 0, 1 or 2")
    if not window > degree >= deriv_order:
        raise ValueError("need window > degree >= deriv_order")
    out = savgol_filter(series.values, window, degree, deriv=deriv_order,
                        delta=series.dt, mode="interp")
    suffix = {0: "", 1: "_dot", 2: "_ddot"}[deriv_order]
    return series.with_values(out, name=series.name + suffix)


def default_smoothing(quantization_step: float) -> float:
    """Residual RMS target equal to the RMS of uniform quantization noise."""
    return quantization_step / math.sqrt(12.0)


def smooth_spline_derivatives(series: TimeSeries, smoothing: float | None = None,
                              quantization_step: float = 0.1):
    """Fit a smoothing cubic spline and return its value and two derivatives.

    Parameters
    ----------
    series : TimeSeries
        At least 8 samples.
    smoothing : float, optional
        Target residual RMS of the fit, in the units of ``series``. ``0``
        interpolates the samples exactly. Defaults to
        ``default_smoothing(quantization_step)``.

    Returns
    -------
    (TimeSeries, TimeSeries, TimeSeries)
        Smoothed values, first and second time derivatives on the input grid.
    """
    n = len(series)
    if n < 8:
        raise ValueError(f"spline smoothing needs at least 8 samples, got {n}")
    if smoothing is None:
        smoothing = default_smoothing(quantization_step)
    if smoothing < 0:
        raise ValueError("smoothing must be non-negative")
    t = series.time
    spline = UnivariateSpline(t, series.values, k=3, s=n * smoothing**2)
    y = spline(t)
    yd = spline.derivative(1)(t)
    ydd = spline.derivative(2)(t)
    return (
        series.with_values(y),
        series.with_values(yd, name=series.name + "_dot"),
        series.with_values(ydd, name=series.name + "_ddot"),
    )
