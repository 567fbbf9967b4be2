"""
Harness - Report Bundle
curves.csv, pairmap.csv, bench.csv and manifest.json in one directory.
"""

import logging
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import scipy
import yaml

from engine.exceptions import HadaptiveError
from kernels.benchmark import benchmark_grid, parse_grid
from kernels.pairing import iter_pairs
from kernels.scheduler import default_workers
from kernels.types import BenchRecord
from costs.formulas import CURVE_COLUMNS, curve_rows, ratio_curves

from .config import ProjectConfig
from .csvio import TOOL_NAME, TOOL_VERSION, write_csv, write_json

logger = logging.getLogger(__name__)

PAIRMAP_SIZES = (16, 32)
PAIRMAP_COLUMNS = ["n", "p", "i", "j"]
BENCH_COLUMNS = ["batch", "channels", "spatial", "strategy", "median_s", "checksum", "skipped"]


def pairmap_rows(sizes: Sequence[int]) -> List[list]:
    return [[n, p, i, j] for n in sizes for p, (i, j) in iter_pairs(n)]


def bench_rows(records: Sequence[BenchRecord]) -> List[list]:
    return [
        [r.batch, r.channels, r.spatial, r.strategy,
         "" if r.skipped else f"{r.median_s:.9f}", r.checksum, int(r.skipped)]
        for r in records
    ]


def environment_versions() -> Dict[str, str]:
    return {
        TOOL_NAME: TOOL_VERSION,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
    }


@dataclass
class Bundle:
    out_dir: Path
    files: Dict[str, Path] = field(default_factory=dict)
    failures: Dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def report_all(cfg: ProjectConfig, out_dir: Union[str, Path, None] = None) -> Bundle:
    """
    Write the report bundle. A failing part is recorded in the manifest and
    the remaining parts still run.
    """
    out = Path(out_dir if out_dir is not None else cfg.run.out_dir)
    seed = cfg.run.seed
    sched = cfg.scheduler
    workers = sched.workers or default_workers()
    bundle = Bundle(out_dir=out)

    def curves():
        points = ratio_curves("channels") + ratio_curves("ratio")
        return write_csv(out / "curves.csv", CURVE_COLUMNS, curve_rows(points), seed=seed,
                         notes=["channels: r=4, m=16..512; ratio: m=64, r=4..24; f=224, k=3"])

    def pairmap():
        return write_csv(out / "pairmap.csv", PAIRMAP_COLUMNS, pairmap_rows(PAIRMAP_SIZES), seed=seed)

    def bench():
        records = benchmark_grid(parse_grid(sched.grid), strategies=sched.strategies, repeats=sched.repeats,
                                 warmups=sched.warmups, workers=workers, seed=seed,
                                 memory_cap_bytes=sched.memory_cap_mb * 1024 * 1024)
        return write_csv(out / "bench.csv", BENCH_COLUMNS, bench_rows(records), seed=seed,
                         notes=[f"workers={workers}", "median_s is wall-clock and not reproducible"])

    for name, part in (("curves", curves), ("pairmap", pairmap), ("bench", bench)):
        try:
            bundle.files[name] = part()
            logger.info("Wrote %s", bundle.files[name])
        except HadaptiveError as e:
            logger.error("report-all: %s failed: %s", name, e)
            bundle.failures[name] = str(e)

    bundle.files["manifest"] = write_json(out / "manifest.json", {
        "versions": environment_versions(),
        "seed": seed,
        "workers": workers,
        "config": cfg.to_dict(),
        "files": {k: p.name for k, p in bundle.files.items()},
        "failures": bundle.failures,
    })
    return bundle
