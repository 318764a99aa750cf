"""
Chunked evaluation of the type-3 transform: I_i = sum_j A_ij V_j over
(pixel chunk i, baseline chunk j) blocks, each evaluated directly or by a small NUFFT.
"""

import functools
import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import replace
from enum import Enum

import numpy as np

from .data_structures import BaselineSet, ChunkSet, PixelSet
from .direct import check_vector, direct_analysis, direct_synthesis
from .errors import CapacityError, DomainError
from .geometry import bounding_box
from .kernel import EPS_MIN, KernelSpec, check_eps
from .nufft import execute_analysis, execute_synthesis, fine_grid_shape, grid_nbytes, make_plan
from .partition import PartitionBudget, auto_chunk
from .utils import default_workers

DEFAULT_DIRECT_THRESHOLD = 200_000
DEFAULT_PLAN_CACHE_SIZE = 4
MAX_SUPPORT_ROUNDS = 8


class BlockStrategy(str, Enum):
    DIRECT = "direct"
    NUFFT = "nufft"


def block_strategy(n_pix_i: int, n_vis_j: int, threshold) -> BlockStrategy:
    if n_pix_i < 0 or n_vis_j < 0:
        raise DomainError(f"Block sizes must be non-negative, got ({n_pix_i}, {n_vis_j})")
    if n_pix_i * n_vis_j <= threshold:
        return BlockStrategy.DIRECT
    return BlockStrategy.NUFFT


def _check_permutation(values, permutation) -> tuple:
    values = np.asarray(values)
    permutation = np.asarray(permutation)
    if len(permutation) != len(values):
        raise DomainError(
            f"Permutation of length {len(permutation)} does not match {len(values)} values"
        )
    return values, permutation


def reorder(values, permutation) -> np.ndarray:
    """
    User order -> chunk order: out[k] = values[permutation[k]].
    """
    values, permutation = _check_permutation(values, permutation)
    return values[permutation]


def inverse_reorder(values, permutation) -> np.ndarray:
    """
    Chunk order -> user order.
    """
    values, permutation = _check_permutation(values, permutation)
    restored = np.empty_like(values)
    restored[permutation] = values
    return restored


class ChunkedPlan:
    """
    Partition of both domains and the per-block recipe of the chunked transform.

    Never mutated after construction, so apply_* may run concurrently on one plan.
    Block NUFFT plans are built on demand and kept in a small LRU cache.
    """

    def __init__(
        self,
        baselines: BaselineSet,
        pixels: PixelSet,
        vis_chunks: ChunkSet,
        pix_chunks: ChunkSet,
        eps: float,
        eps_block: float,
        budget: PartitionBudget,
        direct_threshold=DEFAULT_DIRECT_THRESHOLD,
        strict_accuracy: bool = False,
        workers: int = 1,
        deterministic: bool = False,
        plan_cache_size: int = DEFAULT_PLAN_CACHE_SIZE,
    ):
        self.baselines = baselines
        self.pixels = pixels
        self.vis_chunks = vis_chunks
        self.pix_chunks = pix_chunks
        self.eps = eps
        self.eps_block = eps_block
        self.budget = budget
        self.direct_threshold = direct_threshold
        self.strict_accuracy = strict_accuracy
        self.workers = max(1, int(workers))
        self.deterministic = deterministic
        self.kernel = KernelSpec.resolve(eps_block, budget.upsamp)

        self.vis_order = vis_chunks.sorted_order(baselines.points)
        self.pix_order = pix_chunks.sorted_order(pixels.points)
        # Inputs already permuted to chunk order
        self.chunk_baselines = baselines.subset(self.vis_order)
        self.chunk_pixels = pixels.subset(self.pix_order)
        self._vis_blocks = [
            BaselineSet(self.chunk_baselines.points[vis_chunks.chunk_slice(j)])
            for j in range(vis_chunks.n_chunks)
        ]
        self._pix_blocks = [
            PixelSet(
                self.chunk_pixels.points[pix_chunks.chunk_slice(i)],
                self.chunk_pixels.weights[pix_chunks.chunk_slice(i)],
            )
            for i in range(pix_chunks.n_chunks)
        ]
        self.strategies = [
            [
                block_strategy(int(pix_chunks.counts[i]), int(vis_chunks.counts[j]), direct_threshold)
                for j in range(vis_chunks.n_chunks)
            ]
            for i in range(pix_chunks.n_chunks)
        ]
        self.block_grid_bytes = np.zeros((pix_chunks.n_chunks, vis_chunks.n_chunks), dtype=np.int64)
        for i in range(pix_chunks.n_chunks):
            for j in range(vis_chunks.n_chunks):
                if self.strategies[i][j] is BlockStrategy.NUFFT:
                    self.block_grid_bytes[i, j] = grid_nbytes(self.block_grid_shape(i, j))
        self._block_plan = functools.lru_cache(maxsize=plan_cache_size)(self._make_block_plan)

    def __repr__(self) -> str:
        summary = self.summary()
        width = max(len(key) for key in summary)
        lines = [f"{key:<{width}} : {value}" for key, value in summary.items()]
        border = "+" + "-" * (max(len(line) for line in lines) + 2) + "+"
        return "\n".join([border] + [f"| {line} |" for line in lines] + [border])

    @property
    def shape(self) -> tuple:
        return self.pix_chunks.n_chunks, self.vis_chunks.n_chunks

    @property
    def n_blocks(self) -> int:
        return self.pix_chunks.n_chunks * self.vis_chunks.n_chunks

    @property
    def peak_block_grid_bytes(self) -> int:
        return int(self.block_grid_bytes.max()) if self.block_grid_bytes.size else 0

    @property
    def monolithic_grid_bytes(self) -> int:
        monolithic = KernelSpec.resolve(self.eps, self.budget.upsamp)
        shape = fine_grid_shape(
            bounding_box(self.baselines.points).extents,
            bounding_box(self.pixels.points).extents,
            monolithic.upsamp,
            monolithic.support,
        )
        return grid_nbytes(shape)

    def strategy(self, i: int, j: int) -> BlockStrategy:
        return self.strategies[i][j]

    def block_grid_shape(self, i: int, j: int) -> tuple:
        return fine_grid_shape(
            self.vis_chunks.extents[j],
            self.pix_chunks.extents[i],
            self.kernel.upsamp,
            self.kernel.support,
        )

    def block_baselines(self, j: int) -> BaselineSet:
        return self._vis_blocks[j]

    def block_pixels(self, i: int) -> PixelSet:
        return self._pix_blocks[i]

    def _make_block_plan(self, i: int, j: int):
        return make_plan(
            self._vis_blocks[j],
            self._pix_blocks[i],
            self.eps_block,
            upsamp=self.kernel.upsamp,
            budget_bytes=self.budget.max_bytes,
        )

    def block_plan(self, i: int, j: int):
        return self._block_plan(i, j)

    def summary(self) -> dict:
        n_direct = sum(row.count(BlockStrategy.DIRECT) for row in self.strategies)
        return {
            "n_chunks_vis": self.vis_chunks.n_chunks,
            "n_chunks_pix": self.pix_chunks.n_chunks,
            "n_blocks": self.n_blocks,
            "n_direct_blocks": n_direct,
            "n_nufft_blocks": self.n_blocks - n_direct,
            "eps": self.eps,
            "eps_block": self.eps_block,
            "strict_accuracy": self.strict_accuracy,
            "kernel_support": self.kernel.support,
            "upsamp": self.kernel.upsamp,
            "budget_bytes": self.budget.max_bytes,
            "peak_block_grid_bytes": self.peak_block_grid_bytes,
            "monolithic_grid_bytes": self.monolithic_grid_bytes,
        }


def _block_eps(eps: float, n_blocks: int, strict_accuracy: bool) -> float:
    if not strict_accuracy:
        return eps
    eps_block = eps / n_blocks
    if eps_block < EPS_MIN:
        logging.warning(
            f"Per-block accuracy {eps_block:.3e} is below the attainable {EPS_MIN:g}, clamping"
        )
        eps_block = EPS_MIN
    return eps_block


def build_plan(
    baselines: BaselineSet,
    pixels: PixelSet,
    eps: float,
    budget: PartitionBudget,
    direct_threshold=DEFAULT_DIRECT_THRESHOLD,
    strict_accuracy: bool = False,
    vis_chunks: ChunkSet | None = None,
    pix_chunks: ChunkSet | None = None,
    workers: int | None = None,
    deterministic: bool = False,
    plan_cache_size: int = DEFAULT_PLAN_CACHE_SIZE,
) -> ChunkedPlan:
    """
    Chunk both domains (unless chunk sets are supplied), assign accuracy and a
    strategy to every block, and check NUFFT block grids against the budget.
    """
    check_eps(eps)
    for chunks, points, name in ((vis_chunks, baselines, "baseline"), (pix_chunks, pixels, "pixel")):
        if chunks is not None and chunks.n_points != len(points):
            raise DomainError(f"{name} chunks cover {chunks.n_points} points, expected {len(points)}")

    eps_block = eps
    kernel = KernelSpec.resolve(eps, budget.upsamp)
    sized_budget = replace(budget, upsamp=kernel.upsamp, kernel_support=kernel.support)
    for _ in range(MAX_SUPPORT_ROUNDS):
        if vis_chunks is None or pix_chunks is None:
            auto_vis, auto_pix = auto_chunk(baselines, pixels, sized_budget)
        vis = vis_chunks if vis_chunks is not None else auto_vis
        pix = pix_chunks if pix_chunks is not None else auto_pix
        eps_block = _block_eps(eps, vis.n_chunks * pix.n_chunks, strict_accuracy)
        block_kernel = KernelSpec.resolve(eps_block, budget.upsamp)
        if block_kernel.support <= sized_budget.kernel_support and block_kernel.upsamp <= sized_budget.upsamp:
            break
        # chunks sized for the finer of both kernels
        sized_budget = replace(
            sized_budget,
            upsamp=max(sized_budget.upsamp, block_kernel.upsamp),
            kernel_support=max(sized_budget.kernel_support, block_kernel.support),
        )

    plan = ChunkedPlan(
        baselines,
        pixels,
        vis,
        pix,
        eps=eps,
        eps_block=eps_block,
        budget=budget,
        direct_threshold=direct_threshold,
        strict_accuracy=strict_accuracy,
        workers=default_workers() if workers is None else workers,
        deterministic=deterministic,
        plan_cache_size=plan_cache_size,
    )
    if plan.peak_block_grid_bytes > budget.max_bytes:
        raise CapacityError("A block grid exceeds the memory budget", plan.peak_block_grid_bytes, budget.max_bytes)
    logging.info(
        f"Chunked plan: {pix.n_chunks} x {vis.n_chunks} blocks, eps_block={eps_block:.2e}, "
        f"peak block grid {plan.peak_block_grid_bytes / 2**20:.1f} MiB"
    )
    return plan


def _reduce_blocks(plan: ChunkedPlan, out_chunks: ChunkSet, in_chunks: ChunkSet, evaluate, dtype) -> np.ndarray:
    """
    out[chunk o] = sum over input chunks s of evaluate(o, s), in fixed s order when
    sequential or deterministic. Only the calling thread writes to the output.
    """
    out = np.zeros(out_chunks.n_points, dtype=dtype)
    pairs = [(o, s) for o in range(out_chunks.n_chunks) for s in range(in_chunks.n_chunks)]
    if plan.workers == 1:
        for o, s in pairs:
            out[out_chunks.chunk_slice(o)] += evaluate(o, s)
        return out

    with ThreadPoolExecutor(max_workers=plan.workers) as executor:
        futures = {executor.submit(evaluate, o, s): o for o, s in pairs}
        finished = futures if plan.deterministic else as_completed(futures)
        for future in finished:
            out[out_chunks.chunk_slice(futures[future])] += future.result()
    return out


def apply_synthesis(plan: ChunkedPlan, visibilities, timings: dict | None = None) -> np.ndarray:
    """
    Dirty image in user pixel order from visibilities in user baseline order.
    """
    visibilities = check_vector(visibilities, len(plan.baselines), "visibilities", np.complex128)
    start = time.perf_counter()
    ordered = reorder(visibilities, plan.vis_order)
    permuted = time.perf_counter()

    def evaluate(i, j):
        values = ordered[plan.vis_chunks.chunk_slice(j)]
        if plan.strategy(i, j) is BlockStrategy.DIRECT:
            return direct_synthesis(values, plan.block_baselines(j), plan.block_pixels(i))
        return execute_synthesis(plan.block_plan(i, j), values)

    image = _reduce_blocks(plan, plan.pix_chunks, plan.vis_chunks, evaluate, np.float64)
    computed = time.perf_counter()
    image = inverse_reorder(image, plan.pix_order)
    if timings is not None:
        timings["permute"] = (permuted - start) + (time.perf_counter() - computed)
        timings["blocks"] = computed - permuted
    return image


def apply_analysis(plan: ChunkedPlan, intensity, timings: dict | None = None) -> np.ndarray:
    """
    Visibilities in user baseline order from an image in user pixel order.
    """
    intensity = check_vector(intensity, len(plan.pixels), "intensity", np.float64)
    start = time.perf_counter()
    ordered = reorder(intensity, plan.pix_order)
    permuted = time.perf_counter()

    def evaluate(j, i):
        values = ordered[plan.pix_chunks.chunk_slice(i)]
        if plan.strategy(i, j) is BlockStrategy.DIRECT:
            return direct_analysis(values, plan.block_pixels(i), plan.block_baselines(j))
        return execute_analysis(plan.block_plan(i, j), values)

    visibilities = _reduce_blocks(plan, plan.vis_chunks, plan.pix_chunks, evaluate, np.complex128)
    computed = time.perf_counter()
    visibilities = inverse_reorder(visibilities, plan.vis_order)
    if timings is not None:
        timings["permute"] = (permuted - start) + (time.perf_counter() - computed)
        timings["blocks"] = computed - permuted
    return visibilities
