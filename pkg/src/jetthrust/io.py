"""File formats: flat key-value text and column CSV."""

from __future__ import annotations

import csv
import os
from typing import Mapping, Sequence

import numpy as np

from .signals import TimeSeries


class ConfigError(ValueError):
    """Malformed configuration or data file. Message names the file and line/key."""


def parse_kv(text: str, source: str = "<string>") -> dict:
    """Parse ``key = value`` lines. ``#`` starts a comment; numbers become floats."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = _coerce(value)
    return out


def _coerce(value: str):
    try:
        return float(value)
    except ValueError:
        pass
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    return value


def read_kv(path) -> dict:
    path = os.fspath(path)
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_kv(text, source=path)


def format_kv(values: Mapping, header: str | None = None) -> str:
    lines = [f"# {header}"] if header else []
    for key, value in values.items():
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_kv(path, values: Mapping, header: str | None = None) -> None:
    with open(path, "w") as fh:
        fh.write(format_kv(values, header))


def require(d: Mapping, keys: Sequence[str], source: str) -> None:
    missing = [k for k in keys if k not in d]
    if missing:
        raise ConfigError(f"{source}: missing key(s) {', '.join(missing)}")


def write_columns(path, columns: Mapping[str, np.ndarray]) -> None:
    """Write equal-length columns; ``time`` is printed with 6 decimals."""
    names = list(columns)
    arrays = [np.asarray(columns[n], dtype=float) for n in names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*arrays):
            writer.writerow(
                f"{v:.6f}" if name == "time" else f"{v:.12g}" for name, v in zip(names, row)
            )


def read_columns(path, required: Sequence[str] = ()) -> dict:
    path = os.fspath(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric field in {row}") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


def uniform_step(time: np.ndarray, tol: float = 1e-9) -> float:
    """Sample step of a uniformly sampled time column; rejects jitter above ``tol``."""
    if time.size < 2:
        raise ValueError("need at least two samples to infer the sample step")
    steps = np.diff(time)
    dt = (time[-1] - time[0]) / (time.size - 1)
    tol = tol + 1e-12 * max(1.0, float(np.max(np.abs(time))))
    if dt <= 0 or np.max(np.abs(steps - dt)) > tol:
        raise ValueError(
            f"non-uniform sampling: step varies by {np.max(np.abs(steps - dt)):.3g} s"
        )
    return float(dt)


def write_series(path, series: TimeSeries) -> None:
    write_columns(path, {"time": series.time, series.name: series.values})


def read_series(path, name: str | None = None) -> TimeSeries:
    cols = read_columns(path, required=("time",))
    names = [c for c in cols if c != "time"]
    if name is None:
        if len(names) != 1:
            raise ConfigError(f"{path}: expected exactly one value column, found {names}")
        name = names[0]
    elif name not in cols:
        raise ConfigError(f"{path}: missing column {name}")
    t = cols["time"]
    dt = uniform_step(t)
    return TimeSeries(float(t[0]), dt, cols[name], name=name)
