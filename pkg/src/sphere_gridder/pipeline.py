import json
import logging
import time
from pathlib import Path

import numpy as np

from .array_io import read_array, write_array
from .chunked import ChunkedPlan, apply_analysis, apply_synthesis, build_plan
from .config import RunConfig
from .data_structures import BaselineSet, PixelSet
from .direct import check_vector, direct_analysis, direct_synthesis
from .errors import DomainError
from .nufft import GRID_MONITOR, execute_analysis, execute_synthesis, make_plan
from .utils import (
    compute_nmse,
    config_hash,
    default_workers,
    make_dict_json_compatible,
    version_string,
)

METHODS = ("direct", "hvox", "hvox-mono")
DIRECTIONS = ("analysis", "synthesis")


def load_baselines(path: Path) -> BaselineSet:
    array = read_array(path)
    if array.ndim != 2 or array.shape[1] != 3 or np.iscomplexobj(array):
        raise DomainError(f"Baseline file {path} must hold a real N x 3 array, got {array.shape}")
    return BaselineSet(array)


def load_pixels(path: Path) -> PixelSet:
    """
    Pixels from an N x 3 (unit vectors) or N x 4 (unit vectors and weights) array.
    """
    array = read_array(path)
    if array.ndim != 2 or array.shape[1] not in (3, 4) or np.iscomplexobj(array):
        raise DomainError(f"Pixel file {path} must hold a real N x 3 or N x 4 array, got {array.shape}")
    weights = array[:, 3] if array.shape[1] == 4 else None
    return PixelSet(array[:, :3], weights)


def mesh_array(pixels: PixelSet) -> np.ndarray:
    return np.column_stack([pixels.points, pixels.weights])


def write_json(path: Path, data: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fp:
        json.dump(make_dict_json_compatible(data), fp, indent=2)


def manifest_path(out: Path) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


class ImagingPipeline:
    """
    Runs vis2dirty / dirty2vis with one of the three methods and records a run manifest.
    """

    def __init__(
        self,
        config: RunConfig,
        method: str = "hvox",
        baselines: BaselineSet | None = None,
        pixels: PixelSet | None = None,
    ):
        if method not in METHODS:
            raise DomainError(f"Unknown method {method!r}, expected one of {METHODS}")
        self.config = config
        self.method = method
        self.baselines = baselines if baselines is not None else config.make_baselines()
        self.pixels = pixels if pixels is not None else config.make_pixels()
        self.workers = config.workers if config.workers is not None else default_workers()
        self.plan = None
        self.timings = {}
        self.direction = None

    def prepare(self):
        """
        Build the transform plan once; later calls are free.
        """
        if self.plan is not None or self.method == "direct":
            self.timings.setdefault("plan", 0.0)
            return self.plan
        start = time.perf_counter()
        if self.method == "hvox":
            self.plan = build_plan(
                self.baselines,
                self.pixels,
                self.config.eps,
                self.config.partition_budget(),
                direct_threshold=self.config.threshold,
                strict_accuracy=self.config.strict_accuracy,
                workers=self.workers,
                deterministic=self.config.deterministic,
                plan_cache_size=self.config.plan_cache_size,
            )
        else:
            self.plan = make_plan(
                self.baselines,
                self.pixels,
                self.config.eps,
                upsamp=self.config.upsamp,
                fft_workers=self.workers,
            )
        self.timings["plan"] = time.perf_counter() - start
        return self.plan

    def _run(self, direction: str, values) -> np.ndarray:
        self.direction = direction
        GRID_MONITOR.reset()
        self.prepare()
        start = time.perf_counter()
        block_timings = {}
        if direction == "synthesis":
            if self.method == "direct":
                result = direct_synthesis(values, self.baselines, self.pixels)
            elif self.method == "hvox":
                result = apply_synthesis(self.plan, values, block_timings)
            else:
                values = check_vector(values, len(self.baselines), "visibilities", np.complex128)
                result = execute_synthesis(self.plan, values)
        else:
            if self.method == "direct":
                result = direct_analysis(values, self.pixels, self.baselines)
            elif self.method == "hvox":
                result = apply_analysis(self.plan, values, block_timings)
            else:
                values = check_vector(values, len(self.pixels), "intensity", np.float64)
                result = execute_analysis(self.plan, values)
        elapsed = time.perf_counter() - start
        self.timings["permute"] = block_timings.get("permute", 0.0)
        self.timings["blocks"] = block_timings.get("blocks", elapsed)
        self.timings["total"] = self.timings["plan"] + elapsed
        logging.info(f"{self.method} {direction} took {elapsed:.3f} s")
        return result

    def vis2dirty(self, visibilities) -> np.ndarray:
        return self._run("synthesis", visibilities)

    def dirty2vis(self, intensity) -> np.ndarray:
        return self._run("analysis", intensity)

    @property
    def chunk_counts(self) -> dict:
        if isinstance(self.plan, ChunkedPlan):
            n_vis, n_pix = self.plan.vis_chunks.n_chunks, self.plan.pix_chunks.n_chunks
        else:
            n_vis = n_pix = 1
        return {"n_chunks_vis": n_vis, "n_chunks_pix": n_pix}

    @property
    def peak_block_grid_bytes(self) -> int:
        if isinstance(self.plan, ChunkedPlan):
            return self.plan.peak_block_grid_bytes
        if self.plan is not None:
            return self.plan.grid_bytes
        return 0

    def manifest(self) -> dict:
        resolved = self.config.to_dict()
        manifest = {
            "version": version_string(),
            "config_hash": config_hash(resolved),
            "config": resolved,
            "method": self.method,
            "direction": self.direction,
            "eps": self.config.eps,
            "n_vis": len(self.baselines),
            "n_pix": len(self.pixels),
            "observation": {
                "fov_deg": self.config.observation.fov_deg,
                "frequency_hz": self.config.observation.frequency_hz,
            },
            **self.chunk_counts,
            "peak_block_grid_bytes": self.peak_block_grid_bytes,
            "peak_grid_allocation_bytes": GRID_MONITOR.peak_bytes,
            "timings": dict(self.timings),
        }
        if isinstance(self.plan, ChunkedPlan):
            manifest["plan"] = self.plan.summary()
        return manifest

    def save_manifest(self, out: Path) -> Path:
        path = manifest_path(out)
        logging.info(f"Saving run manifest in {path}")
        write_json(path, self.manifest())
        return path

    def display_summary(self):
        logging.info(f"Method:             {self.method} ({self.direction})")
        logging.info(f"Visibilities:       {len(self.baselines)}")
        logging.info(f"Pixels:             {len(self.pixels)}")
        logging.info(f"Chunks (vis, pix):  {self.chunk_counts['n_chunks_vis']}, {self.chunk_counts['n_chunks_pix']}")
        logging.info(f"Peak block grid:    {self.peak_block_grid_bytes / 2**20:.2f} MiB")
        logging.info(f"Total time:         {self.timings.get('total', 0.0):.3f} s")


def chunk_inspect(plan: ChunkedPlan) -> dict:
    """
    Per-chunk boxes and counts of both domains, with the fine-grid bytes each chunk
    contributes summed over its partner chunks.
    """
    vis_records = plan.vis_chunks.records()
    for j, record in enumerate(vis_records):
        record["grid_bytes"] = int(plan.block_grid_bytes[:, j].sum())
    pix_records = plan.pix_chunks.records()
    for i, record in enumerate(pix_records):
        record["grid_bytes"] = int(plan.block_grid_bytes[i, :].sum())
    return {
        "summary": plan.summary(),
        "chunked_grid_bytes": int(plan.block_grid_bytes.sum()),
        "monolithic_grid_bytes": plan.monolithic_grid_bytes,
        "vis_chunks": vis_records,
        "pix_chunks": pix_records,
    }


def compare_files(path_a: Path, path_b: Path) -> dict:
    """
    NMSE of the array in path_a against the ground truth in path_b.
    """
    return compute_nmse(read_array(path_a), read_array(path_b))


def write_mesh(config: RunConfig, out: Path) -> PixelSet:
    pixels = config.make_pixels()
    write_array(out, mesh_array(pixels))
    logging.info(f"Wrote {len(pixels)} pixels to {out}")
    return pixels
