"""
Chunking of baselines and pixels so that every sub-transform fits a memory budget.

solve_box_dims picks the largest chunk extents (h for baselines, eta for pixels)
allowed by the budget; lattice_bin and fuse then cut each domain into tight chunks.
"""

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.neighbors import KDTree

from .data_structures import BaselineSet, BoundingBox, ChunkSet, PixelSet, as_point_array
from .errors import CapacityError, DomainError
from .geometry import bounding_box
from .kernel import DEFAULT_UPSAMP
from .nufft import COMPLEX_BYTES, fine_grid_shape, grid_nbytes
from .simplex import linprog_bland
from .utils import morton_order

# Chunk size along axes whose extent is zero
DEGENERATE_SIZE = 1e-12
MAX_SHRINK_STEPS = 200
SHRINK_MARGIN = 0.02
NEIGHBOUR_SLACK = 1e-9
MAX_CELL_INDEX = 2**40


@dataclass(frozen=True)
class PartitionBudget:
    max_bytes: float
    upsamp: float = DEFAULT_UPSAMP
    itemsize: int = COMPLEX_BYTES
    anisotropy: float = 1.0
    kernel_support: int = 0

    def __post_init__(self):
        if not self.max_bytes > 0:
            raise DomainError(f"Memory budget must be positive, got {self.max_bytes}")
        if not self.upsamp > 1:
            raise DomainError(f"Upsampling factor must exceed 1, got {self.upsamp}")
        if self.itemsize not in (8, 16):
            raise DomainError(f"Bytes per complex must be 8 or 16, got {self.itemsize}")
        if not self.anisotropy >= 1:
            raise DomainError(f"Anisotropy cap must be at least 1, got {self.anisotropy}")
        if self.kernel_support < 0:
            raise DomainError(f"Kernel support must be non-negative, got {self.kernel_support}")

    @property
    def volume_cap(self) -> float:
        """
        Largest prod(h_k eta_k) whose grid fits the budget, padding aside.
        """
        return 8 * np.pi**3 * self.max_bytes / (self.upsamp**3 * self.itemsize)


@dataclass(frozen=True, eq=False)
class HeisenbergDims:
    h: np.ndarray
    eta: np.ndarray

    def partition_count(self, bbox_vis: BoundingBox, bbox_pix: BoundingBox) -> float:
        """
        prod(B_k / h_k) prod(P_k / eta_k) over non-degenerate axes.
        """
        vis, pix = bbox_vis.extents, bbox_pix.extents
        count = np.prod(np.where(vis > 0, vis / self.h, 1.0))
        return float(count * np.prod(np.where(pix > 0, pix / self.eta, 1.0)))

    def grid_bytes_bound(self, budget: PartitionBudget) -> int:
        """
        Bytes of the padded fine grid of a block whose chunks fill the caps.
        """
        return grid_nbytes(fine_grid_shape(self.h, self.eta, budget.upsamp, budget.kernel_support))


def _log_shrink_factors(vis_extents, pix_extents, log_budget_cells: float, budget: PartitionBudget):
    """
    Solve the sizing LP in shrink variables u_k = log(B_k / h_k), w_k = log(P_k / eta_k) >= 0:

        minimize   sum(u) + sum(w)                      (log of the partition count)
        subject to sum over both-extended axes (u_k + w_k) >= log(prod B_k P_k / cap)
                   |u_j - u_k|, |w_j - w_k|, |u_j - w_k| <= log(alpha)
    """
    vis_axes = [int(k) for k in np.flatnonzero(vis_extents > 0)]
    pix_axes = [int(k) for k in np.flatnonzero(pix_extents > 0)]
    variables = [("vis", k) for k in vis_axes] + [("pix", k) for k in pix_axes]
    u, w = np.zeros(3), np.zeros(3)
    if not variables:
        return u, w
    column = {variable: i for i, variable in enumerate(variables)}
    n = len(variables)
    rows, rhs = [], []

    memory_axes = [k for k in vis_axes if k in pix_axes]
    if memory_axes:
        log_cap = log_budget_cells + len(memory_axes) * math.log(2 * np.pi / budget.upsamp)
        excess = sum(math.log(vis_extents[k]) + math.log(pix_extents[k]) for k in memory_axes) - log_cap
        row = np.zeros(n)
        for k in memory_axes:
            row[column[("vis", k)]] = -1.0
            row[column[("pix", k)]] = -1.0
        rows.append(row)
        rhs.append(-excess)

    log_alpha = math.log(budget.anisotropy)
    for first, second in itertools.combinations(range(n), 2):
        row = np.zeros(n)
        row[first], row[second] = 1.0, -1.0
        rows.extend([row, -row])
        rhs.extend([log_alpha, log_alpha])

    if rows:
        result = linprog_bland(np.ones(n), np.array(rows), np.array(rhs))
        shrink = np.maximum(result.x, 0.0)
    else:
        shrink = np.zeros(n)
    for (domain, k), value in zip(variables, shrink):
        if domain == "vis":
            u[k] = value
        else:
            w[k] = value
    return u, w


def solve_box_dims(bbox_vis: BoundingBox, bbox_pix: BoundingBox, budget: PartitionBudget) -> HeisenbergDims:
    """
    Largest chunk extents minimizing the number of sub-transforms under the budget.

    With a kernel support in the budget the LP cap is tightened until the padded
    5-smooth grid of a full block fits, so chunks never exceed the budget at run time.
    """
    vis_extents = np.asarray(bbox_vis.extents, dtype=np.float64)
    pix_extents = np.asarray(bbox_pix.extents, dtype=np.float64)
    if budget.kernel_support:
        floor = grid_nbytes(fine_grid_shape(np.zeros(3), np.zeros(3), budget.upsamp, budget.kernel_support))
        if floor > budget.max_bytes:
            raise CapacityError(
                f"A {budget.kernel_support}-sample kernel grid does not fit the budget",
                floor,
                budget.max_bytes,
            )

    log_budget_cells = math.log(budget.max_bytes / budget.itemsize)
    for _ in range(MAX_SHRINK_STEPS):
        u, w = _log_shrink_factors(vis_extents, pix_extents, log_budget_cells, budget)
        dims = HeisenbergDims(
            h=np.where(vis_extents > 0, vis_extents * np.exp(-u), DEGENERATE_SIZE),
            eta=np.where(pix_extents > 0, pix_extents * np.exp(-w), DEGENERATE_SIZE),
        )
        if not budget.kernel_support:
            return dims
        bound = dims.grid_bytes_bound(budget)
        if bound <= budget.max_bytes:
            logging.debug(f"Box dims h={dims.h}, eta={dims.eta}, block grid <= {bound} bytes")
            return dims
        log_budget_cells -= math.log(bound / budget.max_bytes) + SHRINK_MARGIN
    raise CapacityError("Could not fit padded block grids in the budget", bound, budget.max_bytes)


def _check_sizes(h) -> np.ndarray:
    h = np.asarray(h, dtype=np.float64).reshape(-1)
    if h.shape != (3,) or not np.all(h > 0) or not np.all(np.isfinite(h)):
        raise DomainError(f"Chunk sizes must be 3 positive finite values, got {h}")
    return h


def _cell_indices(coordinates: np.ndarray, origin: np.ndarray, h: np.ndarray) -> np.ndarray:
    cells = np.floor((coordinates - origin) / h)
    return np.clip(cells, 0, MAX_CELL_INDEX).astype(np.int64)


def lattice_bin(points, h) -> ChunkSet:
    """
    Bin points into half-open h-sized cells anchored at the bounding box minimum,
    keeping occupied cells only. The maximum coordinate is clamped into the last cell.
    """
    points = as_point_array(points)
    h = _check_sizes(h)
    box = bounding_box(points)
    n_cells = np.maximum(1, np.ceil(np.minimum(box.extents / h, MAX_CELL_INDEX))).astype(np.int64)
    cells = np.minimum(_cell_indices(points, box.lower, h), n_cells - 1)

    occupied, labels = np.unique(cells, axis=0, return_inverse=True)
    rank = np.empty(len(occupied), dtype=np.int64)
    rank[morton_order(occupied)] = np.arange(len(occupied))
    return ChunkSet.from_labels(points, rank[labels.reshape(-1)])


def fuse(chunks: ChunkSet, h) -> ChunkSet:
    """
    Merge chunk pairs whose union box fits in h until no such pair remains.

    Each pass scans chunks by ascending (size, Z-order key) and merges a chunk with
    its first fusible neighbour in the same order; chunks merged in a pass wait for
    the next one. A pass without merges certifies the fixpoint.
    """
    h = _check_sizes(h)
    n_chunks = chunks.n_chunks
    if n_chunks < 2:
        return chunks
    lower, upper, counts = chunks.lower.copy(), chunks.upper.copy(), chunks.counts.copy()
    origin = lower.min(axis=0)
    key = np.empty(n_chunks, dtype=np.int64)
    key[morton_order(_cell_indices(lower, origin, h))] = np.arange(n_chunks)
    alive = np.ones(n_chunks, dtype=bool)
    parent = np.arange(n_chunks)

    passes = 0
    while True:
        passes += 1
        ids = np.flatnonzero(alive)
        if len(ids) < 2:
            break
        scan = ids[np.lexsort((key[ids], counts[ids]))]
        rank = np.empty(n_chunks, dtype=np.int64)
        rank[scan] = np.arange(len(scan))
        local = np.empty(n_chunks, dtype=np.int64)
        local[ids] = np.arange(len(ids))
        centers = (0.5 * (lower[ids] + upper[ids]) - origin) / h
        neighbours = KDTree(centers, metric="chebyshev").query_radius(centers, r=1.0 + NEIGHBOUR_SLACK)

        touched = np.zeros(n_chunks, dtype=bool)
        merges = 0
        for a in scan:
            if touched[a]:
                continue
            candidates = ids[neighbours[local[a]]]
            candidates = candidates[(candidates != a) & ~touched[candidates]]
            if len(candidates) == 0:
                continue
            union_lower = np.minimum(lower[candidates], lower[a])
            union_upper = np.maximum(upper[candidates], upper[a])
            fits = np.all(union_upper - union_lower <= h, axis=1)
            if not np.any(fits):
                continue
            fitting = candidates[fits]
            b = fitting[np.argmin(rank[fitting])]
            lower[a] = np.minimum(lower[a], lower[b])
            upper[a] = np.maximum(upper[a], upper[b])
            counts[a] += counts[b]
            key[a] = min(key[a], key[b])
            alive[b] = False
            parent[b] = a
            touched[a] = touched[b] = True
            merges += 1
        if merges == 0:
            break

    while True:
        collapsed = parent[parent]
        if np.array_equal(collapsed, parent):
            break
        parent = collapsed
    survivors = np.flatnonzero(alive)
    survivors = survivors[np.argsort(key[survivors], kind="stable")]
    relabel = np.empty(n_chunks, dtype=np.int64)
    relabel[survivors] = np.arange(len(survivors))
    logging.debug(f"Fused {n_chunks} chunks into {len(survivors)} in {passes} passes")
    return ChunkSet(
        labels=relabel[parent[chunks.labels]],
        lower=lower[survivors],
        upper=upper[survivors],
        counts=counts[survivors],
    )


def auto_chunk(baselines: BaselineSet, pixels: PixelSet, budget: PartitionBudget) -> tuple:
    """
    Size chunks with solve_box_dims, then bin and fuse both domains.
    """
    dims = solve_box_dims(bounding_box(baselines.points), bounding_box(pixels.points), budget)
    vis_chunks = fuse(lattice_bin(baselines.points, dims.h), dims.h)
    pix_chunks = fuse(lattice_bin(pixels.points, dims.eta), dims.eta)
    logging.info(
        f"Chunked {len(baselines)} baselines into {vis_chunks.n_chunks} chunks and "
        f"{len(pixels)} pixels into {pix_chunks.n_chunks} chunks"
    )
    return vis_chunks, pix_chunks
