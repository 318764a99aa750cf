"""
Desk-scale timing benchmarks and accuracy sweeps, written as CSV tables.
"""

import logging
import statistics
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .chunked import apply_analysis, build_plan
from .config import MeshSpec, RunConfig
from .data_structures import PixelSet
from .direct import direct_analysis
from .errors import DomainError
from .nufft import GRID_MONITOR, execute_analysis, make_plan
from .pipeline import METHODS, ImagingPipeline
from .utils import compute_nmse

DIRECT_MAX_ENTRIES = 1e9
BENCH_COLUMNS = [
    "preset",
    "method",
    "direction",
    "seconds",
    "peak_block_bytes",
    "n_chunks_vis",
    "n_chunks_pix",
]


@dataclass(frozen=True)
class Preset:
    name: str
    radius_km: float
    side: int

    def run_config(self, base: RunConfig) -> RunConfig:
        observation = replace(base.observation, layout="ska_low_251", max_radius_m=1e3 * self.radius_km)
        return replace(base, observation=observation, mesh=MeshSpec(type="dcos", size=self.side))


PRESETS = {
    preset.name: preset
    for preset in [
        Preset(name="r0.1", radius_km=0.1, side=80),
        Preset(name="r0.3", radius_km=0.3, side=160),
        Preset(name="r1", radius_km=1.0, side=360),
        Preset(name="r3", radius_km=3.0, side=900),
    ]
}


def get_preset(name: str) -> Preset:
    if name not in PRESETS:
        raise DomainError(f"Unknown preset {name!r}, expected one of {sorted(PRESETS)}")
    return PRESETS[name]


def select_sparse_pixels(pixels: PixelSet, n: int) -> PixelSet:
    """
    The n pixels closest to the phase center.
    """
    if n < 1:
        raise DomainError(f"Sparse pixel count must be positive, got {n}")
    if n >= len(pixels):
        logging.warning(f"Sparse selection of {n} keeps all {len(pixels)} pixels")
        return pixels
    nearest = np.argsort(-pixels.points[:, 2], kind="stable")[:n]
    return pixels.subset(np.sort(nearest))


def time_call(function, repeats: int = 3, warmup: int = 1) -> float:
    """
    Median wall-clock seconds of `repeats` calls after `warmup` untimed ones.
    """
    for _ in range(warmup):
        function()
    durations = []
    for _ in range(repeats):
        start = time.perf_counter()
        function()
        durations.append(time.perf_counter() - start)
    return statistics.median(durations)


class BenchmarkRunner:
    def __init__(
        self,
        preset: str,
        config: RunConfig | None = None,
        methods=METHODS,
        sparse: int | None = None,
        repeats: int = 3,
        warmup: int = 1,
        seed: int = 0,
    ):
        self.preset = get_preset(preset)
        for method in methods:
            if method not in METHODS:
                raise DomainError(f"Unknown method {method!r}, expected one of {METHODS}")
        self.config = self.preset.run_config(config or RunConfig())
        self.methods = list(methods)
        self.repeats = repeats
        self.warmup = warmup
        self.rng = np.random.default_rng(seed)
        self.baselines = self.config.make_baselines()
        self.pixels = self.config.make_pixels()
        if sparse is not None:
            self.pixels = select_sparse_pixels(self.pixels, sparse)
        logging.info(
            f"Preset {self.preset.name}: {len(self.baselines)} visibilities, {len(self.pixels)} pixels"
        )

    def run(self) -> pd.DataFrame:
        visibilities = self.rng.standard_normal(len(self.baselines)) + 1j * self.rng.standard_normal(
            len(self.baselines)
        )
        intensity = self.rng.standard_normal(len(self.pixels))
        rows = []
        for method in self.methods:
            if method == "direct" and len(self.baselines) * len(self.pixels) > DIRECT_MAX_ENTRIES:
                logging.info(f"Skipping direct evaluation on preset {self.preset.name}")
                continue
            pipeline = ImagingPipeline(self.config, method, self.baselines, self.pixels)
            pipeline.prepare()
            for direction in ("analysis", "synthesis"):
                GRID_MONITOR.reset()
                if direction == "analysis":
                    seconds = time_call(lambda: pipeline.dirty2vis(intensity), self.repeats, self.warmup)
                else:
                    seconds = time_call(lambda: pipeline.vis2dirty(visibilities), self.repeats, self.warmup)
                rows.append(
                    {
                        "preset": self.preset.name,
                        "method": method,
                        "direction": direction,
                        "seconds": seconds,
                        "peak_block_bytes": GRID_MONITOR.peak_bytes,
                        **pipeline.chunk_counts,
                    }
                )
                logging.info(f"{method:>9} {direction:<9} {seconds:.4f} s")
        return pd.DataFrame(rows, columns=BENCH_COLUMNS)


class AccuracySweep:
    """
    Analysis of a point-source sky on the configured mesh for a list of requested
    accuracies, scored against direct summation over the source pixels.
    """

    def __init__(self, config: RunConfig, n_sources: int = 5, seed: int = 0):
        self.config = config
        self.baselines = config.make_baselines()
        self.pixels = config.make_pixels()
        rng = np.random.default_rng(seed)
        n_sources = min(n_sources, len(self.pixels))
        self.sources = np.sort(rng.choice(len(self.pixels), size=n_sources, replace=False))
        self.intensity = np.zeros(len(self.pixels))
        self.intensity[self.sources] = rng.uniform(0.5, 1.5, size=n_sources)
        # Only the source pixels contribute, so the oracle stays cheap
        self.reference = direct_analysis(
            self.intensity[self.sources], self.pixels.subset(self.sources), self.baselines
        )

    def run(self, eps_list) -> pd.DataFrame:
        rows = []
        for eps in eps_list:
            start = time.perf_counter()
            plan = make_plan(self.baselines, self.pixels, eps, upsamp=self.config.upsamp)
            mono = execute_analysis(plan, self.intensity)
            rows.append(self._row(eps, "hvox-mono", mono, time.perf_counter() - start))

            start = time.perf_counter()
            chunked = build_plan(
                self.baselines,
                self.pixels,
                eps,
                self.config.partition_budget(),
                direct_threshold=self.config.threshold,
                strict_accuracy=self.config.strict_accuracy,
                workers=self.config.workers,
                deterministic=self.config.deterministic,
            )
            estimate = apply_analysis(chunked, self.intensity)
            rows.append(self._row(eps, "hvox", estimate, time.perf_counter() - start))
        return pd.DataFrame(rows)

    def _row(self, eps: float, method: str, estimate: np.ndarray, seconds: float) -> dict:
        nmse = compute_nmse(estimate, self.reference)
        row = {
            "eps": eps,
            "method": method,
            "nmse": nmse["nmse"],
            "relative_error": float(np.sqrt(nmse["nmse"])),
            "max_abs_dev": nmse["max_abs_dev"],
            "seconds": seconds,
        }
        logging.info(f"eps={eps:.0e} {method:>9}: relative error {row['relative_error']:.3e}")
        return row


def save_table(table: pd.DataFrame, out: Path):
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out, index=False)
    logging.info(f"Saved {len(table)} rows in {out}")
