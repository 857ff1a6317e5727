"""Discrete extended Kalman filter with finite-difference Jacobians."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np


class EkfError(RuntimeError):
    pass


@dataclass(frozen=True)
class EkfInstance:
    """Filter state. ``ekf_step`` returns a new instance; nothing is mutated."""

    x: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    dt: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        n = x.size
        P = np.asarray(self.P, dtype=float).reshape(n, n)
        Q = np.asarray(self.Q, dtype=float).reshape(n, n)
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if R.shape[0] != R.shape[1]:
            raise ValueError("R must be square")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


def numerical_jacobian(fun: Callable, x: np.ndarray, rel_step: float = 1e-6,
                       vectorized: bool = False) -> np.ndarray:
    """Central-difference Jacobian with step ``rel_step * max(1, |x_i|)``.

    The divisor is the representable difference ``(x+h) - (x-h)``, so the
    only error left on affine maps is rounding in ``fun`` itself. With
    ``vectorized=True``, ``fun`` must accept an ``(n, k)`` array of column
    states and return ``(m, k)``; all 2n probes then go in one call.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    h = rel_step * np.maximum(1.0, np.abs(x))
    xp = x + h
    xm = x - h
    span = xp - xm
    if vectorized:
        X = np.repeat(x[:, None], 2 * n, axis=1)
        idx = np.arange(n)
        X[idx, idx] = xp
        X[idx, n + idx] = xm
        Y = np.asarray(fun(X), dtype=float).reshape(-1, 2 * n)
        return (Y[:, :n] - Y[:, n:]) / span
    cols = []
    for i in range(n):
        zp = x.copy()
        zm = x.copy()
        zp[i] = xp[i]
        zm[i] = xm[i]
        cols.append((np.atleast_1d(fun(zp)) - np.atleast_1d(fun(zm))) / span[i])
    return np.column_stack(cols)


def ekf_step(inst: EkfInstance, f: Callable, h: Callable, u, y,
             vectorized: bool = False, jac_f: Callable | None = None,
             jac_h: Callable | None = None) -> EkfInstance:
    """One predict/update cycle.

    ``f(x, u)`` is the discrete transition and ``h(x)`` the measurement
    function. If ``vectorized``, both accept a matrix of column states (see
    :func:`numerical_jacobian`). ``jac_f(x, u)`` and ``jac_h(x)`` replace the
    finite-difference Jacobians when given. The covariance update uses the
    Joseph form and the result is re-symmetrized.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not np.all(np.isfinite(y)):
        raise EkfError(f"non-finite measurement {y}")

    if jac_f is not None:
        F = np.atleast_2d(np.asarray(jac_f(inst.x, u), dtype=float))
    else:
        F = numerical_jacobian(lambda z: f(z, u), inst.x, vectorized=vectorized)
    x_pred = np.asarray(f(inst.x, u), dtype=float)
    P_pred = F @ inst.P @ F.T + inst.Q

    if jac_h is not None:
        H = np.atleast_2d(np.asarray(jac_h(x_pred), dtype=float))
    else:
        H = numerical_jacobian(h, x_pred, vectorized=vectorized)
    innovation = y - np.atleast_1d(h(x_pred))
    S = H @ P_pred @ H.T + inst.R
    if S.shape == (1, 1):
        # scalar case: positive and finite is all that is needed
        s00 = S[0, 0]
        cond = 1.0 if np.isfinite(s00) and s00 > 1e-300 else np.inf
    else:
        cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > 1e14:
        raise EkfError(f"innovation covariance not invertible (condition number {cond:.3g})")
    K = np.linalg.solve(S.T, (P_pred @ H.T).T).T

    x_new = x_pred + K @ innovation
    if not np.all(np.isfinite(x_new)):
        raise EkfError(f"non-finite state after update: {x_new}")
    I_KH = np.eye(x_new.size) - K @ H
    P_new = I_KH @ P_pred @ I_KH.T + K @ inst.R @ K.T
    P_new = 0.5 * (P_new + P_new.T)
    return replace(inst, x=x_new, P=P_new)


def linear_measurement(index: int = 0) -> Callable:
    """``h(x) = x[index]``."""

    def h(x):
        return np.asarray(x)[index:index + 1]

    return h
