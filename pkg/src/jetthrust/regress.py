"""Power-law regression ``y = a * x**b + c`` and goodness-of-fit metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

SSTOT_FLOOR = 1e-30


@dataclass(frozen=True)
class PowerLawFit:
    a: float
    b: float
    c: float
    rmse: float
    r_squared: float
    converged: bool = True
    iterations: int = 0
    history: tuple = field(default=(), repr=False)

    def predict(self, x):
        return power_law(np.asarray(x, dtype=float), self.a, self.b, self.c)


def power_law(x, a, b, c):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        xb = np.where(x > 0, np.abs(x) ** b, 0.0)
    return a * xb + c


def goodness(y, y_hat):
    """Return ``(rmse, r_squared, mae, max_err)``.

    R^2 is ``1 - SSres/SStot`` with SStot floored at 1e-30 so constant data
    does not divide by zero.
    """
    y = np.asarray(y, dtype=float).ravel()
    y_hat = np.asarray(y_hat, dtype=float).ravel()
    if y.size != y_hat.size:
        raise ValueError(f"length mismatch: {y.size} vs {y_hat.size}")
    if y.size == 0:
        raise ValueError("goodness needs at least one sample")
    err = y - y_hat
    ss_res = float(np.sum(err**2))
    ss_tot = max(float(np.sum((y - y.mean()) ** 2)), SSTOT_FLOOR)
    return (
        math.sqrt(ss_res / y.size),
        1.0 - ss_res / ss_tot,
        float(np.mean(np.abs(err))),
        float(np.max(np.abs(err))),
    )


def _initial_guess(x, y, fix_c):
    if fix_c is None:
        span = float(np.ptp(y))
        c0 = float(np.min(y)) - max(1e-3 * span, 1e-9)
    else:
        c0 = float(fix_c)
    z = y - c0
    mask = (x > 0) & (z > 0)
    if np.count_nonzero(mask) >= 2 and np.ptp(np.log(x[mask])) > 0:
        b0, log_a0 = np.polyfit(np.log(x[mask]), np.log(z[mask]), 1)
        a0 = math.exp(log_a0)
    else:
        a0, b0 = 0.0, 1.0
    return np.array([a0, b0, c0])


def fit_power_law(x, y, fix_c: float | None = None, max_iter: int = 200,
                  xtol: float = 1e-10) -> PowerLawFit:
    """Least-squares fit of ``y = a*x**b + c`` by damped Gauss-Newton.

    The start point comes from a straight-line fit in log-log space of
    ``(x, y - c0)``. With ``fix_c`` the offset is held at that value.
    Steps that do not lower the residual are rejected and the damping is
    raised, so the residual sequence is monotone. The result carries
    ``converged=False`` if the relative step never fell below ``xtol``.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have the same length")
    if x.size < 4:
        raise ValueError(f"power-law fit needs at least 4 points, got {x.size}")
    if np.any(x < 0):
        raise ValueError("x must be non-negative")
    if np.ptp(x) == 0:
        raise ValueError("degenerate x: all values equal")

    # work with a*x**b = A*(x/x_ref)**b: A and b are far less correlated
    pos = x[x > 0]
    x_ref = float(np.exp(np.mean(np.log(pos)))) if pos.size else 1.0
    xs = x / x_ref
    a0, b0, c0 = _initial_guess(x, y, fix_c)
    p = np.array([a0 * x_ref**b0, b0, c0])
    free = [0, 1] if fix_c is not None else [0, 1, 2]
    logx = np.log(np.where(xs > 0, xs, 1.0))

    def residual(q):
        return y - power_law(xs, *q)

    def jacobian(q):
        xb = power_law(xs, 1.0, q[1], 0.0)
        cols = [xb, q[0] * xb * logx, np.ones_like(x)]
        return np.column_stack([cols[i] for i in free])

    # step sizes are judged against each parameter's natural scale
    y_scale = max(float(np.max(np.abs(y))), 1e-300)

    def scale(q):
        return np.array([abs(q[0]), max(abs(q[1]), 1.0), max(abs(q[2]), y_scale)])[free]

    r = residual(p)
    cost = float(r @ r)
    history = [cost]
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = jacobian(p)
        A = J.T @ J
        g = J.T @ r
        diag = np.maximum(np.diag(A), 1e-300)
        accepted = False
        while lam < 1e16:
            try:
                delta = np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = p.copy()
            trial[free] += delta
            r_trial = residual(trial)
            cost_trial = float(r_trial @ r_trial)
            if np.isfinite(cost_trial) and cost_trial <= cost:
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            # no descent direction left: minimum to working precision
            converged = True
            break
        step = np.max(np.abs(delta) / (scale(p) + 1e-300))
        p, r, cost = trial, r_trial, cost_trial
        history.append(cost)
        lam = max(lam / 10.0, 1e-12)
        if step < xtol or cost == 0.0:
            converged = True
            break

    p = np.array([p[0] * x_ref ** (-p[1]), p[1], p[2]])
    rmse, r2, _, _ = goodness(y, power_law(x, *p))
    return PowerLawFit(float(p[0]), float(p[1]), float(p[2]), rmse, r2,
                       converged=converged, iterations=it, history=tuple(history))
