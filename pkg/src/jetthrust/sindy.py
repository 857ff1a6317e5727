"""Sparse identification of the shaft-speed dynamics.

Candidate functions are evaluated on samples of ``(omega, omega_dot, u)``
and regressed against ``omega_ddot`` with sequentially thresholded least
squares. The physics-informed library puts the steady-state residual
``f_ss = omega - a1*u**b1 - c1`` first, followed by every monomial that
contains ``omega_dot``, so any model drawn from it is at rest exactly on the
steady-state map.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .plant import OmegaUModel

# display symbols, in the order used for monomial enumeration
VARIABLES = ("ω", "u", "ω̇")
SUPERSCRIPTS = {2: "²", 3: "³", 4: "⁴", 5: "⁵", 6: "⁶"}

# names of the four terms of the identified model, keyed by OmegaUModel field
MODEL_TERMS = {"K_ss": "f_ss", "K_d": "ω̇", "K_wd": "ωω̇", "K_wwd": "ω²ω̇"}


class StructureError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateLibrary:
    names: tuple
    features: tuple  # callables (omega, omega_dot, u) -> array

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("feature names must be unique")
        if len(self.names) != len(self.features):
            raise ValueError("one name per feature")

    def __len__(self) -> int:
        return len(self.names)

    def evaluate(self, omega, omega_dot, u) -> np.ndarray:
        """Design matrix, one column per feature."""
        omega = np.asarray(omega, dtype=float)
        omega_dot = np.asarray(omega_dot, dtype=float)
        u = np.asarray(u, dtype=float)
        cols = [np.broadcast_to(f(omega, omega_dot, u), omega.shape) for f in self.features]
        return np.column_stack(cols)

    def index(self, name: str) -> int:
        return self.names.index(name)


def _monomial_name(powers: Sequence[int]) -> str:
    parts = []
    for sym, p in zip(VARIABLES, powers):
        if p == 1:
            parts.append(sym)
        elif p > 1:
            parts.append(sym + SUPERSCRIPTS.get(p, f"^{p}"))
    return "".join(parts) or "1"


def _monomial(powers: Sequence[int]) -> Callable:
    pw, pu, pd = powers

    def f(omega, omega_dot, u):
        return omega**pw * u**pu * omega_dot**pd

    return f


def _monomials(max_degree: int, need_omega_dot: bool, include_constant: bool):
    out = []
    if include_constant:
        out.append((0, 0, 0))
    for degree in range(1, max_degree + 1):
        for combo in combinations_with_replacement(range(3), degree):
            powers = tuple(combo.count(i) for i in range(3))
            if need_omega_dot and powers[2] == 0:
                continue
            out.append(powers)
    return out


def steady_state_residual(a1: float, b1: float, c1: float) -> Callable:
    def f_ss(omega, omega_dot, u):
        u = np.asarray(u, dtype=float)
        ub = np.where(u > 0, np.abs(u) ** b1, 0.0)
        return omega - a1 * ub - c1

    return f_ss


def build_library_B(ss_constants, max_degree: int = 3) -> CandidateLibrary:
    """``f_ss`` followed by all monomials in (ω, u, ω̇) containing ω̇.

    Monomials are ordered by total degree, then lexicographically with
    ω < u < ω̇ (the order of ``itertools.combinations_with_replacement``).
    For ``max_degree=3`` this gives
    f_ss, ω̇, ωω̇, uω̇, ω̇², ω²ω̇, ωuω̇, ωω̇², u²ω̇, uω̇², ω̇³.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    a1, b1, c1 = ss_constants
    powers = _monomials(max_degree, need_omega_dot=True, include_constant=False)
    names = ("f_ss",) + tuple(_monomial_name(p) for p in powers)
    feats = (steady_state_residual(a1, b1, c1),) + tuple(_monomial(p) for p in powers)
    return CandidateLibrary(names, feats)


def build_library_A(max_degree: int = 3) -> CandidateLibrary:
    """Plain polynomial library in (ω, u, ω̇), constant term included."""
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    powers = _monomials(max_degree, need_omega_dot=False, include_constant=True)
    return CandidateLibrary(tuple(_monomial_name(p) for p in powers),
                            tuple(_monomial(p) for p in powers))


@dataclass(frozen=True)
class SparseModel:
    names: tuple
    coefficients: np.ndarray
    active_set: tuple
    threshold_used: float
    residual_rms: float
    iterations: int = 0
    warnings: tuple = field(default=())

    def active_names(self) -> list:
        return [self.names[i] for i in self.active_set]

    def as_dict(self) -> dict:
        return {self.names[i]: float(self.coefficients[i]) for i in self.active_set}

    def predict(self, theta: np.ndarray) -> np.ndarray:
        return theta @ self.coefficients


def _independent_columns(A: np.ndarray, rcond: float = 1e-10):
    """Indices (into A's columns) of a well-conditioned subset, plus the dropped ones."""
    _, R, piv = scipy.linalg.qr(A, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return [], list(range(A.shape[1]))
    keep = d > rcond * d[0]
    return sorted(piv[keep].tolist()), sorted(piv[~keep].tolist())


def stlsq(library: CandidateLibrary, data, target, threshold: float = 0.05,
          max_iters: int = 20, active=None) -> SparseModel:
    """Sequentially thresholded least squares.

    Parameters
    ----------
    library : CandidateLibrary
    data : array (n, 3) or tuple of three arrays
        Samples of ``omega, omega_dot, u``.
    target : array (n,)
        Samples of ``omega_ddot``.
    threshold : float
        Pruning level. Columns and target are scaled to unit RMS first, so
        the threshold is the fraction of the target RMS below which a
        term's contribution is dropped.
    active : sequence of int, optional
        Starting active set (default: all features).
    """
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    theta = _design(library, data)
    y = np.asarray(target, dtype=float).ravel()
    n, m = theta.shape
    if y.size != n:
        raise ValueError("target length differs from data rows")
    if n < 10 * m:
        raise ValueError(f"need at least {10 * m} rows for {m} features, got {n}")

    coef = np.zeros(m)
    y_scale = float(np.sqrt(np.mean(y**2)))
    if y_scale == 0.0:
        return SparseModel(library.names, coef, (), threshold, 0.0)

    col_scale = np.sqrt(np.mean(theta**2, axis=0))
    col_scale[col_scale == 0] = 1.0
    A = theta / col_scale
    b = y / y_scale

    notes = []
    current = sorted(range(m) if active is None else {int(i) for i in active})
    xi = np.zeros(m)
    it = 0
    for it in range(1, max_iters + 1):
        if not current:
            break
        keep, dropped = _independent_columns(A[:, current])
        if dropped:
            names = [library.names[current[j]] for j in dropped]
            msg = f"rank-deficient active set, dropped {names}"
            notes.append(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
            current = [current[j] for j in keep]
        xi = np.zeros(m)
        xi[current] = np.linalg.lstsq(A[:, current], b, rcond=None)[0]
        survivors = [i for i in current if abs(xi[i]) >= threshold]
        if survivors == current:
            break
        current = survivors
    else:
        notes.append(f"active set not stable after {max_iters} iterations")

    if not current:
        raise ValueError("threshold too aggressive: every candidate was pruned")
    xi[[i for i in range(m) if i not in current]] = 0.0
    coef = xi * y_scale / col_scale
    resid = y - theta @ coef
    return SparseModel(library.names, coef, tuple(current), threshold,
                       float(np.sqrt(np.mean(resid**2))), it, tuple(notes))


def _design(library: CandidateLibrary, data) -> np.ndarray:
    if isinstance(data, (tuple, list)) and len(data) == 3:
        omega, omega_dot, u = data
    else:
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("data must have columns (omega, omega_dot, u)")
        omega, omega_dot, u = arr.T
    return library.evaluate(omega, omega_dot, u)


def assemble_omega_u_model(sparse: SparseModel, ss_constants) -> OmegaUModel:
    """Map an identified sparse model onto the four-term shaft model.

    Raises :class:`StructureError` if terms outside f_ss, ω̇, ωω̇, ω²ω̇ are
    active, or if nothing is active.
    """
    active = sparse.active_names()
    if not active:
        raise StructureError("empty model: no active terms")
    allowed = set(MODEL_TERMS.values())
    extra = [name for name in active if name not in allowed]
    if extra:
        raise StructureError(f"unsupported model structure identified: {', '.join(extra)}")
    coeffs = sparse.as_dict()
    a1, b1, c1 = ss_constants
    return OmegaUModel(a1=a1, b1=b1, c1=c1,
                       **{k: coeffs.get(term, 0.0) for k, term in MODEL_TERMS.items()})
