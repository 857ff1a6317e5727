"""Engine presets (P160, P220) and custom engine files."""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

from .io import ConfigError, format_kv, parse_kv, read_kv, require
from .plant import EngineSpec, OmegaUModel, ThrustMap

PRESETS = ("P160", "P220")

SPEC_KEYS = ("omega_idle", "omega_max", "thrust_idle", "thrust_max")
MODEL_KEYS = ("a1", "b1", "c1", "K_ss", "K_d", "K_wd", "K_wwd")
MAP_KEYS = ("a2", "b2", "c2")


@dataclass(frozen=True)
class Engine:
    spec: EngineSpec
    model: OmegaUModel
    thrust_map: ThrustMap

    @property
    def name(self) -> str:
        return self.spec.name


def engine_from_dict(d: dict, source: str) -> Engine:
    require(d, SPEC_KEYS + MODEL_KEYS + MAP_KEYS, source)
    try:
        spec = EngineSpec(name=str(d.get("name", os.path.basename(source))),
                          **{k: float(d[k]) for k in SPEC_KEYS})
        model = OmegaUModel(**{k: float(d[k]) for k in MODEL_KEYS})
        tmap = ThrustMap(**{k: float(d[k]) for k in MAP_KEYS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return Engine(spec, model, tmap)


def load_engine(name_or_path: str) -> Engine:
    """Load a built-in preset by name or a custom engine key-value file by path."""
    if name_or_path in PRESETS:
        text = resources.files("jetthrust.data").joinpath(f"{name_or_path}.kv").read_text()
        return engine_from_dict(parse_kv(text, source=name_or_path), name_or_path)
    if not os.path.exists(name_or_path):
        raise ConfigError(
            f"engine file not found: {name_or_path} (presets: {', '.join(PRESETS)})"
        )
    return engine_from_dict(read_kv(name_or_path), name_or_path)


def model_from_file(path) -> OmegaUModel:
    d = read_kv(path)
    require(d, MODEL_KEYS, os.fspath(path))
    try:
        return OmegaUModel(**{k: float(d[k]) for k in MODEL_KEYS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def thrust_map_from_file(path) -> ThrustMap:
    d = read_kv(path)
    require(d, MAP_KEYS, os.fspath(path))
    try:
        return ThrustMap(**{k: float(d[k]) for k in MAP_KEYS})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def model_text(model: OmegaUModel, header: str | None = None) -> str:
    return format_kv(model.coefficients(), header)


def thrust_map_text(tmap: ThrustMap, header: str | None = None) -> str:
    return format_kv({"a2": tmap.a2, "b2": tmap.b2, "c2": tmap.c2}, header)
