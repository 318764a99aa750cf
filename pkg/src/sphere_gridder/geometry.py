"""
Coordinate conventions, bounding boxes, spherical meshes and synthetic baselines.

Baselines are angular frequencies p = 2 pi uvw / lambda so that the transforms use
exp(-j <r, p>) with no hidden constant.
"""

import logging
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from .data_structures import (
    BaselineSet,
    BoundingBox,
    ObservationConfig,
    PixelSet,
    as_point_array,
)
from .errors import DomainError

LAYOUT_COLUMNS = ["name", "east_m", "north_m", "up_m"]
BUILTIN_LAYOUTS = {
    "ska_low_251": "ska_low_251.csv",
    "lofar_hba_38": "lofar_hba_38.csv",
}
GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
MAX_DCOS_FOV_DEG = 120.0
NORTH_POLE = np.array([0.0, 0.0, 1.0])


def bounding_box(points) -> BoundingBox:
    """
    Exact coordinate-wise extrema of a non-empty finite point set.
    """
    points = as_point_array(points)
    return BoundingBox(lower=points.min(axis=0), upper=points.max(axis=0))


def _unit_direction(direction) -> np.ndarray:
    direction = np.asarray(direction, dtype=np.float64).reshape(-1)
    if direction.shape != (3,) or not np.all(np.isfinite(direction)):
        raise DomainError(f"Phase center must be a finite 3-vector, got {direction}")
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise DomainError("Phase center must be non-zero")
    return direction / norm


def rotate_from_pole(points: np.ndarray, phase_center) -> np.ndarray:
    """
    Apply the minimal rotation taking the north pole onto the phase center.
    """
    center = _unit_direction(phase_center)
    if np.array_equal(center, NORTH_POLE):
        return points
    axis = np.cross(NORTH_POLE, center)
    sine = np.linalg.norm(axis)
    if sine == 0:
        rotation = Rotation.from_rotvec([np.pi, 0.0, 0.0])
    else:
        rotation = Rotation.from_rotvec(axis / sine * np.arctan2(sine, center[2]))
    rotated = rotation.apply(points)
    return rotated / np.linalg.norm(rotated, axis=1, keepdims=True)


def make_dcos_mesh(phase_center, fov_deg: float, side: int) -> PixelSet:
    """
    Uniform side x side (l, m) grid of half-width sin(fov / 2) on the tangent plane,
    lifted to the sphere with n = sqrt(1 - l^2 - m^2).

    Pixels are ordered with l varying slowest, so a (side, side) reshape gives the image.
    """
    if not 0 < fov_deg <= MAX_DCOS_FOV_DEG:
        raise DomainError(
            f"Direction-cosine meshes need 0 < fov <= {MAX_DCOS_FOV_DEG} degrees, got {fov_deg}"
        )
    if side < 1:
        raise DomainError(f"Mesh side must be at least 1, got {side}")

    half_width = np.sin(np.deg2rad(fov_deg) / 2)
    axis = np.zeros(1) if side == 1 else np.linspace(-half_width, half_width, side)
    l, m = np.meshgrid(axis, axis, indexing="ij")
    l, m = l.ravel(), m.ravel()
    radius2 = l**2 + m**2
    keep = radius2 < 1
    if not np.any(keep):
        raise DomainError(f"No pixel of the {side}x{side} mesh lies on the sphere")
    if not np.all(keep):
        logging.info(f"Dropping {np.count_nonzero(~keep)} pixels outside the unit disk")

    points = np.stack([l[keep], m[keep], np.sqrt(1 - radius2[keep])], axis=1)
    return PixelSet(rotate_from_pole(points, phase_center))


def make_fibonacci_cap_mesh(phase_center, fov_deg: float, n: int) -> PixelSet:
    """
    Spherical Fibonacci lattice on the cap of angular radius fov / 2, equal-area weights.
    """
    if n < 1:
        raise DomainError(f"Mesh size must be at least 1, got {n}")
    if not 0 < fov_deg <= 360:
        raise DomainError(f"Cap diameter must be in (0, 360] degrees, got {fov_deg}")

    cos_max = np.cos(np.deg2rad(fov_deg) / 2)
    cap_area = 2 * np.pi * (1 - cos_max)
    if n == 1:
        points = NORTH_POLE.reshape(1, 3).copy()
    else:
        index = np.arange(n)
        z = 1 - (index + 0.5) / n * (1 - cos_max)
        radius = np.sqrt(np.clip(1 - z**2, 0, None))
        longitude = index * GOLDEN_ANGLE
        points = np.stack([radius * np.cos(longitude), radius * np.sin(longitude), z], axis=1)
    return PixelSet(rotate_from_pole(points, phase_center), np.full(n, cap_area / n))


def _enu_to_uvw_matrix(hour_angle: float, declination: float, latitude: float) -> np.ndarray:
    sin_lat, cos_lat = np.sin(latitude), np.cos(latitude)
    enu_to_xyz = np.array(
        [
            [0.0, -sin_lat, cos_lat],
            [1.0, 0.0, 0.0],
            [0.0, cos_lat, sin_lat],
        ]
    )
    sin_h, cos_h = np.sin(hour_angle), np.cos(hour_angle)
    sin_d, cos_d = np.sin(declination), np.cos(declination)
    xyz_to_uvw = np.array(
        [
            [sin_h, cos_h, 0.0],
            [-sin_d * cos_h, sin_d * sin_h, cos_d],
            [cos_d * cos_h, -cos_d * sin_h, sin_d],
        ]
    )
    return xyz_to_uvw @ enu_to_xyz


def simulate_baselines(cfg: ObservationConfig) -> BaselineSet:
    """
    Baselines of every antenna pair (i < j) at every hour angle, time-major.
    """
    first, second = np.triu_indices(len(cfg.antennas), k=1)
    physical = cfg.antennas[first] - cfg.antennas[second]
    declination = np.deg2rad(cfg.declination_deg)
    latitude = np.deg2rad(cfg.latitude_deg)

    rows = [
        physical @ _enu_to_uvw_matrix(hour_angle, declination, latitude).T
        for hour_angle in cfg.hour_angles_rad
    ]
    uvw = np.concatenate(rows, axis=0)
    logging.info(
        f"Simulated {len(uvw)} baselines ({cfg.n_pairs} pairs x {cfg.n_times} times) "
        f"at {cfg.frequency_hz / 1e6:.1f} MHz"
    )
    return BaselineSet(2 * np.pi * uvw / cfg.wavelength_m)


def load_antenna_layout(source) -> tuple[list[str], np.ndarray]:
    """
    Read a `name,east_m,north_m,up_m` CSV, or one of the shipped layouts by name.
    """
    if isinstance(source, str) and source in BUILTIN_LAYOUTS:
        path = resources.files("sphere_gridder").joinpath("data", "layouts", BUILTIN_LAYOUTS[source])
        with resources.as_file(path) as layout_path:
            frame = pd.read_csv(layout_path)
    else:
        path = Path(source)
        if not path.is_file():
            raise DomainError(
                f"Antenna layout {source} is neither a file nor one of {sorted(BUILTIN_LAYOUTS)}"
            )
        frame = pd.read_csv(path)

    if list(frame.columns) != LAYOUT_COLUMNS:
        raise DomainError(
            f"Antenna layout header must be {','.join(LAYOUT_COLUMNS)}, got {','.join(map(str, frame.columns))}"
        )
    positions = frame[LAYOUT_COLUMNS[1:]].to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(positions)):
        raise DomainError(f"Antenna layout {source} contains non-finite positions")
    return frame["name"].astype(str).tolist(), positions


def truncate_layout(positions: np.ndarray, radius_m: float) -> np.ndarray:
    """
    Keep antennas whose horizontal distance to the array origin is at most radius_m.
    """
    horizontal = np.hypot(positions[:, 0], positions[:, 1])
    return positions[horizontal <= radius_m]
