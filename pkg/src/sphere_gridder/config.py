"""
Run configuration: a JSON document describing the observation, the pixel mesh and
the transform settings. Unknown keys and wrong types are rejected.
"""

import json
import logging
import types
import typing
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .data_structures import BaselineSet, ObservationConfig, PixelSet
from .errors import ConfigError
from .geometry import (
    NORTH_POLE,
    load_antenna_layout,
    make_dcos_mesh,
    make_fibonacci_cap_mesh,
    simulate_baselines,
    truncate_layout,
)
from .kernel import DEFAULT_UPSAMP
from .partition import PartitionBudget

MESH_TYPES = ("dcos", "fibonacci")


def _allowed_types(annotation) -> tuple:
    if isinstance(annotation, types.UnionType) or typing.get_origin(annotation) is typing.Union:
        return typing.get_args(annotation)
    return (annotation,)


def _matches(value, allowed: tuple) -> bool:
    if value is None:
        return type(None) in allowed
    if isinstance(value, bool):
        return bool in allowed
    if isinstance(value, int) and (int in allowed or float in allowed):
        return True
    if isinstance(value, float):
        return float in allowed
    return any(t in (str, dict) and isinstance(value, t) for t in allowed)


def _build(cls, data, section: str):
    """
    Instantiate a config dataclass from a dict, rejecting unknown keys and bad types.
    """
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{section}' must be a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"Unknown keys in '{section}': {', '.join(unknown)}")
    hints = typing.get_type_hints(cls)
    values = {}
    for key, value in data.items():
        allowed = _allowed_types(hints[key])
        if not _matches(value, allowed):
            expected = " or ".join(getattr(t, "__name__", str(t)) for t in allowed)
            raise ConfigError(f"'{section}.{key}' must be {expected}, got {value!r}")
        values[key] = float(value) if float in allowed and isinstance(value, int) and int not in allowed else value
    return cls(**values)


@dataclass
class ObservationSpec:
    layout: str = "ska_low_251"
    declination_deg: float = -45.0
    right_ascension_deg: float = 15.0
    latitude_deg: float = -26.82
    n_times: int = 3
    span_hours: float = 8.0
    frequency_hz: float = 150e6
    fov_deg: float = 30.0
    max_radius_m: float | None = None
    mid_lst_hours: float | None = None

    def to_observation(self) -> ObservationConfig:
        _, positions = load_antenna_layout(self.layout)
        if self.max_radius_m is not None:
            positions = truncate_layout(positions, self.max_radius_m)
        return ObservationConfig(
            antennas=positions,
            declination_deg=self.declination_deg,
            right_ascension_deg=self.right_ascension_deg,
            n_times=self.n_times,
            span_hours=self.span_hours,
            frequency_hz=self.frequency_hz,
            fov_deg=self.fov_deg,
            latitude_deg=self.latitude_deg,
            mid_lst_hours=self.mid_lst_hours,
        )


@dataclass
class MeshSpec:
    type: str = "dcos"
    size: int = 360
    fov_deg: float | None = None

    def __post_init__(self):
        if self.type not in MESH_TYPES:
            raise ConfigError(f"Mesh type must be one of {MESH_TYPES}, got {self.type!r}")


@dataclass
class RunConfig:
    observation: ObservationSpec = field(default_factory=ObservationSpec)
    mesh: MeshSpec = field(default_factory=MeshSpec)
    eps: float = 1e-7
    budget_bytes: float = 500e6
    anisotropy: float = 1.0
    upsamp: float = DEFAULT_UPSAMP
    threshold: int = 200_000
    workers: int | None = None
    deterministic: bool = False
    strict_accuracy: bool = False
    plan_cache_size: int = 4

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        observation = _build(ObservationSpec, data.pop("observation", {}), "observation")
        mesh = _build(MeshSpec, data.pop("mesh", {}), "mesh")
        top = _build(_TopLevel, data, "config")
        return cls(observation=observation, mesh=mesh, **asdict(top))

    def to_dict(self) -> dict:
        return asdict(self)

    def partition_budget(self) -> PartitionBudget:
        return PartitionBudget(
            max_bytes=self.budget_bytes,
            upsamp=self.upsamp,
            anisotropy=self.anisotropy,
        )

    def make_baselines(self) -> BaselineSet:
        return simulate_baselines(self.observation.to_observation())

    def make_pixels(self) -> PixelSet:
        """
        Mesh centred on the phase center, which is the w axis of the baseline frame.
        """
        fov = self.mesh.fov_deg if self.mesh.fov_deg is not None else self.observation.fov_deg
        if self.mesh.type == "dcos":
            return make_dcos_mesh(NORTH_POLE, fov, self.mesh.size)
        return make_fibonacci_cap_mesh(NORTH_POLE, fov, self.mesh.size)


@dataclass
class _TopLevel:
    eps: float = 1e-7
    budget_bytes: float = 500e6
    anisotropy: float = 1.0
    upsamp: float = DEFAULT_UPSAMP
    threshold: int = 200_000
    workers: int | None = None
    deterministic: bool = False
    strict_accuracy: bool = False
    plan_cache_size: int = 4


def load_run_config(path=None) -> RunConfig:
    """
    Read a RunConfig from JSON, or the defaults when no path is given.
    """
    if path is None:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as error:
        raise ConfigError(f"Config file {path} is not valid JSON: {error}") from error
    logging.info(f"Loaded run config from {path}")
    return RunConfig.from_dict(data)
