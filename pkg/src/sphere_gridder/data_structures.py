from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError

SPEED_OF_LIGHT = 299_792_458.0
UNIT_NORM_TOLERANCE = 1e-12


def as_point_array(points, name: str = "points") -> np.ndarray:
    """
    Validate and convert a collection of 3-vectors to a (N, 3) float64 array.
    """
    array = np.asarray(points, dtype=np.float64)
    if array.ndim == 1 and array.size == 3:
        array = array.reshape(1, 3)
    if array.ndim != 2 or array.shape[1] != 3:
        raise DomainError(f"{name} must have shape (N, 3), got {array.shape}")
    if len(array) == 0:
        raise DomainError(f"{name} must not be empty")
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} contain NaN or infinite coordinates")
    return np.ascontiguousarray(array)


@dataclass(frozen=True, eq=False)
class BoundingBox:
    """
    Closed axis-aligned box enclosing a point set.
    """

    lower: np.ndarray
    upper: np.ndarray

    @property
    def extents(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def contains(self, points: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
        """
        Whether each point lies inside the box, up to a tolerance relative to the box scale.
        """
        scale = np.maximum(1.0, np.maximum(np.abs(self.lower), np.abs(self.upper)))
        tolerance = rtol * scale
        inside = (points >= self.lower - tolerance) & (points <= self.upper + tolerance)
        return np.all(inside, axis=-1)


@dataclass
class BaselineSet:
    """
    Baselines p = 2 pi uvw / lambda, one row per visibility.
    """

    points: np.ndarray

    def __post_init__(self):
        self.points = as_point_array(self.points, "baselines")

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, indices) -> "BaselineSet":
        return BaselineSet(self.points[indices])


@dataclass
class PixelSet:
    """
    Unit-sphere pixel directions with their quadrature weights.
    """

    points: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        self.points = as_point_array(self.points, "pixels")
        norms = np.linalg.norm(self.points, axis=1)
        worst = float(np.max(np.abs(norms - 1.0)))
        if worst > UNIT_NORM_TOLERANCE:
            raise DomainError(f"Pixels must be unit vectors (largest norm deviation {worst:.3e})")
        if self.weights is None:
            self.weights = np.ones(len(self.points))
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float64).reshape(-1)
        if len(self.weights) != len(self.points):
            raise DomainError(
                f"Got {len(self.weights)} weights for {len(self.points)} pixels"
            )
        if not np.all(np.isfinite(self.weights)):
            raise DomainError("Pixel weights must be finite")

    def __len__(self) -> int:
        return len(self.points)

    def subset(self, indices) -> "PixelSet":
        return PixelSet(self.points[indices], self.weights[indices])


@dataclass
class ObservationConfig:
    """
    Synthetic observation: array layout, pointing, time sampling and frequency.
    Defaults follow a 150 MHz SKA-Low-like desk-scale observation.
    """

    antennas: np.ndarray
    declination_deg: float = -45.0
    right_ascension_deg: float = 15.0
    n_times: int = 3
    span_hours: float = 8.0
    frequency_hz: float = 150e6
    fov_deg: float = 30.0
    latitude_deg: float = -26.82
    # Local sidereal time at mid-observation; None centres the track on transit
    mid_lst_hours: float | None = None

    def __post_init__(self):
        self.antennas = np.asarray(self.antennas, dtype=np.float64)
        if self.antennas.ndim != 2 or self.antennas.shape[1] != 3:
            raise DomainError(f"Antenna positions must have shape (N, 3), got {self.antennas.shape}")
        if len(self.antennas) < 2:
            raise DomainError(f"At least 2 antennas are needed, got {len(self.antennas)}")
        if not np.all(np.isfinite(self.antennas)):
            raise DomainError("Antenna positions must be finite")
        if not self.frequency_hz > 0:
            raise DomainError(f"Frequency must be positive, got {self.frequency_hz}")
        if not 0 < self.fov_deg <= 180:
            raise DomainError(f"Field of view must be in (0, 180] degrees, got {self.fov_deg}")
        if self.n_times < 1:
            raise DomainError(f"At least one time sample is needed, got {self.n_times}")
        if self.span_hours < 0:
            raise DomainError(f"Observation span must be non-negative, got {self.span_hours}")
        if not -90 <= self.declination_deg <= 90:
            raise DomainError(f"Declination must be in [-90, 90], got {self.declination_deg}")
        if not -90 <= self.latitude_deg <= 90:
            raise DomainError(f"Latitude must be in [-90, 90], got {self.latitude_deg}")
        if not 0 <= self.right_ascension_deg < 360:
            raise DomainError(f"Right ascension must be in [0, 360), got {self.right_ascension_deg}")
        if self.mid_lst_hours is not None and not 0 <= self.mid_lst_hours < 24:
            raise DomainError(f"Sidereal time must be in [0, 24) hours, got {self.mid_lst_hours}")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.frequency_hz

    @property
    def n_pairs(self) -> int:
        n = len(self.antennas)
        return n * (n - 1) // 2

    @property
    def hour_angles_rad(self) -> np.ndarray:
        """
        Hour angles LST - RA evenly spread over the span around mid_lst_hours
        (around transit when it is unset), wrapped to [-12, 12) hours.
        """
        if self.n_times == 1:
            hours = np.zeros(1)
        else:
            hours = np.linspace(-self.span_hours / 2, self.span_hours / 2, self.n_times)
        if self.mid_lst_hours is not None:
            offset = self.mid_lst_hours - self.right_ascension_deg / 15.0
            hours = (hours + offset + 12.0) % 24.0 - 12.0
        return hours * np.pi / 12.0


@dataclass(frozen=True, eq=False)
class ChunkSet:
    """
    Partition of a point set into chunks, with each chunk's tight bounding box.

    labels[i] is the chunk of point i; chunks are numbered 0..K-1 in their
    deterministic output order.
    """

    labels: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_labels(cls, points: np.ndarray, labels: np.ndarray) -> "ChunkSet":
        """
        Build a chunk set from per-point labels 0..K-1, computing tight boxes.
        """
        points = as_point_array(points)
        labels = np.asarray(labels, dtype=np.int64).reshape(-1)
        if len(labels) != len(points):
            raise DomainError(f"Got {len(labels)} labels for {len(points)} points")
        if labels.min() < 0:
            raise DomainError("Chunk labels must be non-negative")
        counts = np.bincount(labels)
        if np.any(counts == 0):
            raise DomainError("Chunk labels must be contiguous with no empty chunk")
        order = np.argsort(labels, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        ordered = points[order]
        lower = np.minimum.reduceat(ordered, starts, axis=0)
        upper = np.maximum.reduceat(ordered, starts, axis=0)
        return cls(labels=labels, lower=lower, upper=upper, counts=counts)

    def __len__(self) -> int:
        return len(self.counts)

    @property
    def n_chunks(self) -> int:
        return len(self.counts)

    @property
    def n_points(self) -> int:
        return len(self.labels)

    @property
    def extents(self) -> np.ndarray:
        return self.upper - self.lower

    def sorted_order(self, points) -> np.ndarray:
        """
        Chunk-by-chunk permutation with points sorted by (x, y, z) inside each chunk,
        so that the result does not depend on the order the points came in.
        """
        points = as_point_array(points)
        if len(points) != self.n_points:
            raise DomainError(f"Got {len(points)} points for a chunk set of {self.n_points}")
        return np.lexsort((points[:, 2], points[:, 1], points[:, 0], self.labels))

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)]).astype(np.int64)

    def chunk_slice(self, k: int) -> slice:
        return slice(int(self.offsets[k]), int(self.offsets[k + 1]))

    def box(self, k: int) -> BoundingBox:
        return BoundingBox(lower=self.lower[k].copy(), upper=self.upper[k].copy())

    def records(self) -> list[dict]:
        return [
            {
                "id": k,
                "min": self.lower[k].tolist(),
                "max": self.upper[k].tolist(),
                "count": int(self.counts[k]),
            }
            for k in range(self.n_chunks)
        ]
