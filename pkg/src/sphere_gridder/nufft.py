"""
Three-dimensional type-3 NUFFT between baselines (sources) and sky pixels (targets).

Synthesis runs: phase shift -> spread on the source lattice -> taper -> centered FFT
-> interpolate on the target lattice -> deconvolve and phase shift at the pixels.
Analysis runs the adjoint chain in reverse.

Both lattices have n_k nodes per axis. The source lattice has spacing a_k and the
target lattice 2 pi / (n_k a_k), so one FFT maps between them. a_k is chosen so that
both point clouds fill the same fraction of their lattice's band.
"""

import logging
import math
import threading
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .data_structures import BaselineSet, BoundingBox, PixelSet, as_point_array
from .direct import check_vector
from .errors import CapacityError, DomainError
from .geometry import bounding_box
from .kernel import DEFAULT_UPSAMP, KernelSpec, es_kernel_eval, es_kernel_ft
from .utils import next_smooth_size

COMPLEX_BYTES = 16
# Stencil entries (points x support^3) processed at once
STENCIL_BATCH = 2**20
# Stand-in width for a target box of zero extent when choosing the lattice spacing
MIN_TARGET_EXTENT = 1e-9
DOMAINS = ("source", "target")


class GridMonitor:
    """
    Process-wide record of fine-grid allocations, used to audit memory budgets.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.peak_bytes = 0
        self.allocations = 0

    def allocate(self, shape) -> np.ndarray:
        grid = np.zeros(shape, dtype=np.complex128)
        with self._lock:
            self.peak_bytes = max(self.peak_bytes, grid.nbytes)
            self.allocations += 1
        return grid

    def reset(self):
        with self._lock:
            self.peak_bytes = 0
            self.allocations = 0


GRID_MONITOR = GridMonitor()


@dataclass
class UniformGrid3:
    values: np.ndarray
    origin: np.ndarray
    spacing: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.values.shape


def fine_grid_shape(vis_extents, pix_extents, upsamp: float, support: int) -> tuple:
    """
    Per-axis fine grid size: next 5-smooth >= upsamp B_k P_k / (2 pi) + 2 support.
    """
    return tuple(
        next_smooth_size(upsamp * b * p / (2 * np.pi) + 2 * support)
        for b, p in zip(vis_extents, pix_extents)
    )


def grid_nbytes(shape) -> int:
    return int(np.prod(shape, dtype=np.float64)) * COMPLEX_BYTES


def source_spacing(vis_extent: float, pix_extent: float, n: int, support: int) -> float:
    """
    Source lattice spacing a balancing the occupied band fractions of both lattices.

    With nu = P a / (4 pi) for the targets and B / (2 n a) + support / (2 n) for the
    sources, equating them gives nu^2 - (support / 2n) nu - B P / (8 pi n) = 0.
    """
    pix_extent = max(pix_extent, MIN_TARGET_EXTENT)
    linear = support / (2 * n)
    constant = vis_extent * pix_extent / (8 * np.pi * n)
    nu = 0.5 * (linear + math.sqrt(linear**2 + 4 * constant))
    return 4 * np.pi * nu / pix_extent


def _reciprocal(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    np.divide(1.0, values, out=out, where=values > 0)
    return out


@dataclass(frozen=True, eq=False)
class Nufft3Plan:
    """
    Geometry, kernel and precomputed diagonal factors of one type-3 transform.
    """

    kernel: KernelSpec
    source_box: BoundingBox
    target_box: BoundingBox
    shape: tuple
    source_spacing: np.ndarray
    sources: np.ndarray
    targets: np.ndarray
    target_weights: np.ndarray
    grid_taper: tuple
    source_factor: np.ndarray
    target_factor: np.ndarray
    fft_workers: int = 1

    @property
    def target_spacing(self) -> np.ndarray:
        return 2 * np.pi / (np.asarray(self.shape) * self.source_spacing)

    @property
    def grid_bytes(self) -> int:
        return grid_nbytes(self.shape)

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def box(self, domain: str) -> BoundingBox:
        return self.source_box if domain == "source" else self.target_box

    def lattice(self, domain: str) -> tuple:
        """
        Origin and spacing of the source or target lattice; node l sits at
        center + (l - n // 2) * spacing.
        """
        if domain not in DOMAINS:
            raise DomainError(f"Unknown lattice {domain}, expected one of {DOMAINS}")
        spacing = self.source_spacing if domain == "source" else self.target_spacing
        middle = np.asarray(self.shape) // 2
        return self.box(domain).center - middle * spacing, spacing


def make_plan(
    baselines: BaselineSet,
    pixels: PixelSet,
    eps: float,
    upsamp: float = DEFAULT_UPSAMP,
    budget_bytes: float | None = None,
    fft_workers: int = 1,
) -> Nufft3Plan:
    """
    Size the fine grid from the Heisenberg boxes of both sets and precompute the
    kernel deconvolution and box-centering factors. upsamp is a lower bound that
    small eps may raise (KernelSpec.resolve).
    """
    kernel = KernelSpec.resolve(eps, upsamp)
    source_box = bounding_box(baselines.points)
    target_box = bounding_box(pixels.points)
    vis_extents, pix_extents = source_box.extents, target_box.extents

    shape = fine_grid_shape(vis_extents, pix_extents, kernel.upsamp, kernel.support)
    required = grid_nbytes(shape)
    if budget_bytes is not None and required > budget_bytes:
        raise CapacityError(f"Fine grid {shape} exceeds the memory budget", required, budget_bytes)

    spacing = np.array(
        [
            source_spacing(b, p, n, kernel.support)
            for b, p, n in zip(vis_extents, pix_extents, shape)
        ]
    )
    target_spacing = 2 * np.pi / (np.asarray(shape) * spacing)
    source_halfwidth = kernel.support * spacing / 2
    target_halfwidth = kernel.support * target_spacing / 2

    # Grid-side deconvolution of the interpolation kernel
    grid_taper = tuple(
        _reciprocal(es_kernel_ft((np.arange(n) - n // 2) * a, kernel.beta, hw))
        for n, a, hw in zip(shape, spacing, target_halfwidth)
    )
    # Pixel-side deconvolution of the spreading kernel
    centered_targets = pixels.points - target_box.center
    spreading_ft = np.ones(len(pixels))
    for k in range(3):
        spreading_ft *= es_kernel_ft(centered_targets[:, k], kernel.beta, source_halfwidth[k])
    scale = float(np.prod(2 * np.pi / np.asarray(shape, dtype=np.float64)))

    target_factor = scale * _reciprocal(spreading_ft) * np.exp(1j * (pixels.points @ source_box.center))
    source_factor = np.exp(1j * ((baselines.points - source_box.center) @ target_box.center))

    logging.debug(
        f"Type-3 plan: {len(baselines)} sources, {len(pixels)} targets, grid {shape} "
        f"({required / 2**20:.1f} MiB), support {kernel.support}"
    )
    return Nufft3Plan(
        kernel=kernel,
        source_box=source_box,
        target_box=target_box,
        shape=shape,
        source_spacing=spacing,
        sources=baselines.points,
        targets=pixels.points,
        target_weights=pixels.weights,
        grid_taper=grid_taper,
        source_factor=source_factor,
        target_factor=target_factor,
        fft_workers=fft_workers,
    )


def _batches(n_points: int, support: int):
    size = max(1, STENCIL_BATCH // support**3)
    for start in range(0, n_points, size):
        yield slice(start, min(start + size, n_points))


def _stencil(points: np.ndarray, origin, spacing, shape, kernel: KernelSpec) -> tuple:
    """
    Periodic node indices and kernel weights of the `support` nodes nearest each point,
    per axis: both arrays have shape (M, 3, support).
    """
    half = kernel.halfwidth_samples
    position = (points - origin) / spacing
    first = np.ceil(position - half).astype(np.int64)
    nodes = first[:, :, None] + np.arange(kernel.support)
    weights = es_kernel_eval((nodes - position[:, :, None]) / half, kernel.beta)
    nodes %= np.asarray(shape, dtype=np.int64)[None, :, None]
    return nodes, weights


def _check_points(points, plan: Nufft3Plan, domain: str) -> np.ndarray:
    points = as_point_array(points)
    inside = plan.box(domain).contains(points)
    if not np.all(inside):
        raise DomainError(
            f"{np.count_nonzero(~inside)} points lie outside the plan's {domain} box"
        )
    return points


def spread(points, values, plan: Nufft3Plan, domain: str = "source") -> UniformGrid3:
    """
    Accumulate each value onto the support^3 nearest lattice nodes with the
    separable kernel.
    """
    origin, spacing = plan.lattice(domain)
    grid = GRID_MONITOR.allocate(plan.shape)
    values = np.asarray(values, dtype=np.complex128).reshape(-1)
    if len(values) == 0:
        return UniformGrid3(grid, origin, spacing)
    points = _check_points(points, plan, domain)
    if len(points) != len(values):
        raise DomainError(f"Got {len(values)} values for {len(points)} points")

    n2, n3 = plan.shape[1], plan.shape[2]
    flat = grid.reshape(-1)
    for batch in _batches(len(points), plan.kernel.support):
        nodes, weights = _stencil(points[batch], origin, spacing, plan.shape, plan.kernel)
        index = (nodes[:, 0, :, None, None] * n2 + nodes[:, 1, None, :, None]) * n3 + nodes[:, 2, None, None, :]
        contribution = values[batch, None, None, None] * (
            weights[:, 0, :, None, None] * weights[:, 1, None, :, None] * weights[:, 2, None, None, :]
        )
        np.add.at(flat, index.reshape(-1), contribution.reshape(-1))
    return UniformGrid3(grid, origin, spacing)


def interpolate(grid: UniformGrid3, points, plan: Nufft3Plan, domain: str = "target") -> np.ndarray:
    """
    Kernel-weighted sum of the support^3 nearest lattice nodes; the adjoint of spread.
    """
    if grid.shape != tuple(plan.shape):
        raise DomainError(f"Grid shape {grid.shape} does not match plan shape {plan.shape}")
    points = _check_points(points, plan, domain)
    origin, spacing = plan.lattice(domain)
    values = np.empty(len(points), dtype=np.complex128)
    for batch in _batches(len(points), plan.kernel.support):
        nodes, weights = _stencil(points[batch], origin, spacing, plan.shape, plan.kernel)
        gathered = grid.values[nodes[:, 0, :, None, None], nodes[:, 1, None, :, None], nodes[:, 2, None, None, :]]
        partial = np.einsum("mabc,mc->mab", gathered, weights[:, 2])
        partial = np.einsum("mab,mb->ma", partial, weights[:, 1])
        values[batch] = np.einsum("ma,ma->m", partial, weights[:, 0])
    return values


def transform_grid(grid: UniformGrid3, plan: Nufft3Plan, domain: str) -> UniformGrid3:
    """
    Centered unnormalized 3D DFT onto the given lattice: exp(+j) towards the targets,
    exp(-j) towards the sources.
    """
    shifted = sfft.ifftshift(grid.values)
    if domain == "target":
        transformed = sfft.ifftn(shifted, norm="forward", workers=plan.fft_workers, overwrite_x=True)
    else:
        transformed = sfft.fftn(shifted, workers=plan.fft_workers, overwrite_x=True)
    origin, spacing = plan.lattice(domain)
    return UniformGrid3(sfft.fftshift(transformed), origin, spacing)


def _apply_taper(grid: UniformGrid3, plan: Nufft3Plan) -> UniformGrid3:
    taper_x, taper_y, taper_z = plan.grid_taper
    grid.values *= taper_x[:, None, None]
    grid.values *= taper_y[None, :, None]
    grid.values *= taper_z[None, None, :]
    return grid


def execute_synthesis(plan: Nufft3Plan, visibilities) -> np.ndarray:
    """
    I(r) = alpha(r) Re[sum_i V_i exp(+j <r, p_i>)] to relative accuracy eps.
    """
    visibilities = check_vector(visibilities, plan.n_sources, "visibilities", np.complex128)
    grid = spread(plan.sources, visibilities * plan.source_factor, plan, "source")
    grid = transform_grid(_apply_taper(grid, plan), plan, "target")
    values = interpolate(grid, plan.targets, plan, "target")
    return plan.target_weights * np.real(values * plan.target_factor)


def execute_analysis(plan: Nufft3Plan, intensity) -> np.ndarray:
    """
    V_i = sum_r I(r) alpha(r) exp(-j <r, p_i>) to relative accuracy eps.
    """
    intensity = check_vector(intensity, plan.n_targets, "intensity", np.float64)
    weighted = intensity * plan.target_weights * np.conj(plan.target_factor)
    grid = spread(plan.targets, weighted, plan, "target")
    grid = _apply_taper(transform_grid(grid, plan, "source"), plan)
    values = interpolate(grid, plan.sources, plan, "source")
    return values * np.conj(plan.source_factor)
