"""Experiment configuration (YAML)."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

import yaml

from .engines import PRESETS
from .io import ConfigError, read_kv
from .pipeline import DEFAULT_THRESHOLD, identification_schedule, validation_schedule
from .plant import FailureEvent
from .signals import SignalSpec


@dataclass
class ExperimentConfig:
    engine: str = "P220"
    sample_rate: float = 100.0
    quantization_step: float = 0.1
    integrator_dt: float = 1e-3
    seed: int = 0
    omega_noise_std: float = 0.0
    schedule: list = field(default_factory=identification_schedule)
    validation_schedule: list = field(default_factory=validation_schedule)
    failures: list = field(default_factory=list)
    observer: dict = field(default_factory=dict)
    sindy_threshold: float = DEFAULT_THRESHOLD
    spline_smoothing: float | None = None
    max_passes: int = 5
    output_dir: str = "out"

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    def manifest(self) -> dict:
        return {
            "engine": self.engine,
            "seed": self.seed,
            "sample_rate": self.sample_rate,
            "quantization_step": self.quantization_step,
            "integrator_dt": self.integrator_dt,
            "omega_noise_std": self.omega_noise_std,
            "schedule": [s.to_dict() for s in self.schedule],
            "failures": [f.to_dict() for f in self.failures],
        }


def _parse_specs(items, key: str, source: str) -> list:
    if not isinstance(items, list):
        raise ConfigError(f"{source}: key '{key}' must be a list")
    out = []
    for i, item in enumerate(items):
        try:
            out.append(SignalSpec.from_dict(item))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{source}: {key}[{i}]: {exc}") from exc
    return out


def config_from_dict(d: dict, source: str = "<config>", base_dir: str = ".") -> ExperimentConfig:
    if d is None:
        d = {}
    if not isinstance(d, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ConfigError(f"{source}: unknown key(s) {', '.join(unknown)}")
    cfg = ExperimentConfig()
    for key, value in d.items():
        if key == "schedule" or key == "validation_schedule":
            value = _parse_specs(value, key, source)
        elif key == "failures":
            try:
                value = [FailureEvent.from_dict(item) for item in value]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{source}: failures: {exc}") from exc
        elif key == "observer":
            if isinstance(value, str):
                path = value if os.path.isabs(value) else os.path.join(base_dir, value)
                value = read_kv(path)
            elif not isinstance(value, dict):
                raise ConfigError(f"{source}: 'observer' must be a mapping or a file path")
        elif key == "engine":
            value = str(value)
            if value not in PRESETS:
                path = value if os.path.isabs(value) else os.path.join(base_dir, value)
                if not os.path.exists(path):
                    raise ConfigError(f"{source}: engine file not found: {path}")
                value = path
        elif key in ("seed", "max_passes"):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{source}: key '{key}' must be an integer")
        elif key in ("output_dir",):
            value = str(value)
        elif key == "spline_smoothing" and value is None:
            pass
        else:
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{source}: key '{key}' must be a number, got {value!r}") from None
        setattr(cfg, key, value)
    if not cfg.sample_rate > 0:
        raise ConfigError(f"{source}: sample_rate must be positive")
    if not cfg.quantization_step > 0:
        raise ConfigError(f"{source}: quantization_step must be positive")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = os.fspath(path)
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{path}{where}: invalid YAML: {getattr(exc, 'problem', exc)}") from exc
    return config_from_dict(data, source=path, base_dir=os.path.dirname(os.path.abspath(path)))
