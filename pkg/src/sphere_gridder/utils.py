import hashlib
import json
import logging
import os
import subprocess
from dataclasses import asdict, is_dataclass
from enum import Enum
from importlib import metadata
from pathlib import Path

import numpy as np

from .errors import DomainError

MAX_GRID_SIDE = 2**24
MORTON_BITS = 21


def _five_smooth_table(limit: int) -> np.ndarray:
    values = []
    p2 = 1
    while p2 <= limit:
        p3 = p2
        while p3 <= limit:
            p5 = p3
            while p5 <= limit:
                values.append(p5)
                p5 *= 5
            p3 *= 3
        p2 *= 2
    return np.array(sorted(values), dtype=np.int64)


FIVE_SMOOTH_SIZES = _five_smooth_table(MAX_GRID_SIDE)


def next_smooth_size(target) -> int:
    """
    Smallest 2^a 3^b 5^c integer >= target (and >= 2).
    """
    wanted = max(2, int(np.ceil(target)))
    position = np.searchsorted(FIVE_SMOOTH_SIZES, wanted)
    if position == len(FIVE_SMOOTH_SIZES):
        raise DomainError(
            f"Grid side {wanted} exceeds the largest supported size {MAX_GRID_SIDE}"
        )
    return int(FIVE_SMOOTH_SIZES[position])


def _spread_bits(values: np.ndarray) -> np.ndarray:
    v = values.astype(np.uint64) & np.uint64(0x1FFFFF)
    v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
    return v


def morton_order(cells: np.ndarray) -> np.ndarray:
    """
    Stable permutation sorting non-negative integer 3D cells along a Z-order curve.

    Falls back to lexicographic order when a coordinate does not fit in 21 bits.
    """
    cells = np.asarray(cells, dtype=np.int64)
    if len(cells) == 0:
        return np.zeros(0, dtype=np.int64)
    if cells.min() < 0 or cells.max() >= 2**MORTON_BITS:
        return np.lexsort((cells[:, 2], cells[:, 1], cells[:, 0]))
    codes = (
        (_spread_bits(cells[:, 0]) << np.uint64(2))
        | (_spread_bits(cells[:, 1]) << np.uint64(1))
        | _spread_bits(cells[:, 2])
    )
    return np.argsort(codes, kind="stable")


def compute_nmse(estimate, reference) -> dict:
    """
    Normalized mean square error of an estimate against a ground truth.
    Falls back to the plain MSE when the reference is identically zero.
    """
    estimate = np.asarray(estimate)
    reference = np.asarray(reference)
    if estimate.shape != reference.shape:
        raise DomainError(
            f"Cannot compare arrays of shapes {estimate.shape} and {reference.shape}"
        )
    deviation = estimate - reference
    error = float(np.sum(np.abs(deviation) ** 2))
    norm = float(np.sum(np.abs(reference) ** 2))
    max_abs = float(np.max(np.abs(deviation))) if deviation.size else 0.0
    if norm == 0:
        mse = error / max(deviation.size, 1)
        return {"nmse": None, "mse": mse, "max_abs_dev": max_abs, "normalized": False}
    return {"nmse": error / norm, "max_abs_dev": max_abs, "normalized": True}


def relative_error(estimate, reference) -> float:
    return float(np.linalg.norm(estimate - reference) / np.linalg.norm(reference))


def default_workers() -> int:
    """
    Half the physical cores, taking two hardware threads per core.
    """
    return max(1, (os.cpu_count() or 2) // 4)


def make_dict_json_compatible(data):
    """
    Replaces values to be able dump a dict in a json:
        - Convert numpy scalars and arrays to native types
        - Convert complex numbers to [real, imag]
        - Convert paths, enums and dataclasses
    """
    if is_dataclass(data) and not isinstance(data, type):
        return make_dict_json_compatible(asdict(data))
    if isinstance(data, dict):
        return {str(key): make_dict_json_compatible(value) for key, value in data.items()}
    elif isinstance(data, (list, tuple)):
        return [make_dict_json_compatible(item) for item in data]
    elif isinstance(data, np.ndarray):
        return make_dict_json_compatible(data.tolist())
    elif isinstance(data, (bool, np.bool_)):
        return bool(data)
    elif isinstance(data, Path):
        return str(data)
    elif isinstance(data, Enum):
        return data.value
    elif isinstance(data, np.integer):
        return int(data)
    elif isinstance(data, (complex, np.complexfloating)):
        return [float(data.real), float(data.imag)]
    elif isinstance(data, np.floating):
        return float(data)
    else:
        return data


def config_hash(config: dict) -> str:
    """
    SHA-256 of the canonical JSON form of a configuration.
    """
    canonical = json.dumps(make_dict_json_compatible(config), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def version_string() -> str:
    """
    git describe of the working tree, or the installed package version.
    """
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if result.returncode == 0 and result.stdout.strip():
            return result.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        logging.debug("git describe unavailable")
    try:
        return metadata.version("sphere-gridder")
    except metadata.PackageNotFoundError:
        return "0.1.0+unknown"
