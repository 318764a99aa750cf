"""
Direct summation of the analysis and synthesis equations.

O(N_vis N_pix); the ground truth for accuracy checks and the strategy for tiny blocks.
"""

import numpy as np

from .data_structures import BaselineSet, PixelSet
from .errors import DomainError

# Complex entries of the phase matrix evaluated at once
BLOCK_ENTRIES = 2**22


def check_vector(values, length: int, name: str, dtype) -> np.ndarray:
    """
    Validate a 1-D vector of the expected length and convert it to dtype.
    """
    array = np.asarray(values)
    if array.ndim != 1 or len(array) != length:
        raise DomainError(f"{name} must be a vector of length {length}, got shape {array.shape}")
    if dtype is np.float64 and np.iscomplexobj(array):
        raise DomainError(f"{name} must be real-valued")
    array = np.ascontiguousarray(array, dtype=dtype)
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{name} contains NaN or infinite values")
    return array


def direct_analysis(intensity, pixels: PixelSet, baselines: BaselineSet) -> np.ndarray:
    """
    V_i = sum_r I(r) alpha(r) exp(-j <r, p_i>)
    """
    intensity = check_vector(intensity, len(pixels), "intensity", np.float64)
    weighted = intensity * pixels.weights
    visibilities = np.empty(len(baselines), dtype=np.complex128)
    rows = max(1, BLOCK_ENTRIES // len(pixels))
    for start in range(0, len(baselines), rows):
        stop = min(start + rows, len(baselines))
        phase = baselines.points[start:stop] @ pixels.points.T
        visibilities[start:stop] = np.exp(-1j * phase) @ weighted
    return visibilities


def direct_synthesis(visibilities, baselines: BaselineSet, pixels: PixelSet) -> np.ndarray:
    """
    I(r) = alpha(r) Re[sum_i V_i exp(+j <r, p_i>)]
    """
    visibilities = check_vector(visibilities, len(baselines), "visibilities", np.complex128)
    image = np.empty(len(pixels), dtype=np.float64)
    rows = max(1, BLOCK_ENTRIES // len(baselines))
    for start in range(0, len(pixels), rows):
        stop = min(start + rows, len(pixels))
        phase = pixels.points[start:stop] @ baselines.points.T
        image[start:stop] = np.real(np.exp(1j * phase) @ visibilities)
    return pixels.weights * image
