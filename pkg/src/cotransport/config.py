"""Run configuration: dataclass defaults, JSON overrides, and a stable hash."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .core import KinematicChain, RobotConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PngConfig:
    N: float = 6.0
    v_cruise: float = 0.2


@dataclass(frozen=True)
class SamplingConfig:
    count: int = 500
    objective: str = "ring"  # "ring": |d - rho_d|, "nearest": d


@dataclass(frozen=True)
class MpcConfig:
    horizon: int = 20
    q: float = 100.0
    r: float = 0.1
    delta: float = 0.1
    barrier_weight: float = 1.0
    max_iter: int = 100
    tol: float = 1e-8
    ref_speed: float = 0.2  # top tool speed along the reference schedule
    tail_steps: int = 250  # extra steps allowed after the reference ends


@dataclass(frozen=True)
class SimConfig:
    robot: RobotConfig = field(default_factory=RobotConfig)
    png: PngConfig = field(default_factory=PngConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    max_steps: int = 100_000
    n_d: int = 60

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _override(obj, values: Mapping[str, Any], path: str):
    if not isinstance(values, Mapping):
        raise ConfigError(f"{path or 'config'} must be an object")
    known = {f.name: f for f in dataclasses.fields(obj)}
    changes = {}
    for key, val in values.items():
        if key not in known:
            raise ConfigError(f"unknown config key '{path}{key}'")
        cur = getattr(obj, key)
        if dataclasses.is_dataclass(cur):
            changes[key] = _override(cur, val, f"{path}{key}.")
        elif isinstance(cur, tuple):
            changes[key] = tuple(tuple(v) if isinstance(v, list) else v for v in val)
        else:
            changes[key] = val
    try:
        if isinstance(obj, RobotConfig) and "arm" in changes and "rho_l" not in values:
            changes["rho_l"] = changes["arm"].reach
        return dataclasses.replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value under '{path or 'config'}': {exc}") from exc


def config_from_dict(values: Mapping[str, Any]) -> SimConfig:
    return _override(SimConfig(), values, "")


def load_config(path) -> SimConfig:
    text = Path(path).read_text()
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(values)


def load_chain(path) -> KinematicChain:
    """Arm description file: JSON with any of the :class:`KinematicChain` fields."""
    try:
        values = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"chain file {path} is not valid JSON: {exc}") from exc
    return _override(KinematicChain(), values, "arm.")
