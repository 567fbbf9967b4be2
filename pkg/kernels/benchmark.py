"""
Kernels - Benchmark Grid
Median wall-clock timing of the dispatch strategies over shape grids and
the normalized-difference heatmap between two strategies.
"""

import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from engine.exceptions import InvalidArgumentError, SchedulerError

from .pairing import num_pairs
from .scheduler import checksum, default_workers, plan_dispatch, reference_expand, run_dispatch
from .types import BenchRecord, Strategy

logger = logging.getLogger(__name__)

GRID_AXES = ("batch", "channels", "spatial")
DEFAULT_GRID = {"batch": [1], "channels": [16], "spatial": [8]}
DEFAULT_WARMUPS = 2
DEFAULT_REPEATS = 7
MIN_REPEATS = 5
DEFAULT_MEMORY_CAP = 512 * 1024 * 1024
HEATMAP_EPS = 1e-9


@dataclass
class HeatmapCell:
    """
    Normalized runtime difference of strategy A against B on one cell.

    Positive values mean A is slower.
    """
    batch: int
    channels: int
    spatial: int
    value: float


def format_dt(dt: float) -> str:
    if dt != dt:
        return "skipped"
    if abs(dt) > 10e-3:
        return "%.1f ms" % (dt * 1e3)
    if abs(dt) > 10e-6:
        return "%.1f us" % (dt * 1e6)
    return "%.0f ns" % (dt * 1e9)


# ============================================================================
# Grid parsing
# ============================================================================

def _parse_values(text: str) -> List[int]:
    if ".." in text:
        lo_text, hi_text = text.split("..", 1)
        lo, hi = int(lo_text), int(hi_text)
        if lo < 1 or hi < lo:
            raise InvalidArgumentError(f"Range must satisfy 1 <= lo <= hi, got {text}")
        values = []
        v = lo
        while v < hi:
            values.append(v)
            v *= 2
        values.append(hi)
        return values
    values = [int(part) for part in text.split(",") if part.strip()]
    if not values or min(values) < 1:
        raise InvalidArgumentError(f"Grid values must be positive integers, got '{text}'")
    return values


def parse_grid(specs: Sequence[str]) -> Dict[str, List[int]]:
    """
    Parse `name=a,b,c` lists and `name=lo..hi` doubling ranges (hi included).

    Axes left out keep their defaults.

    Raises:
        InvalidArgumentError: Unknown axis or malformed values
    """
    grid = {k: list(v) for k, v in DEFAULT_GRID.items()}
    for spec in specs:
        if "=" not in spec:
            raise InvalidArgumentError(f"Grid entry must look like name=values, got '{spec}'")
        name, text = spec.split("=", 1)
        name = name.strip().lower()
        if name not in GRID_AXES:
            raise InvalidArgumentError(f"Unknown grid axis '{name}'. Use one of: {', '.join(GRID_AXES)}")
        try:
            grid[name] = _parse_values(text.strip())
        except ValueError as e:
            raise InvalidArgumentError(f"Bad values for {name}: {e}") from e
    if min(grid["channels"]) < 2:
        raise InvalidArgumentError("Channel axis needs at least 2 channels")
    return grid


# ============================================================================
# Timing
# ============================================================================

def cell_bytes(batch: int, channels: int, spatial: int, itemsize: int = 4) -> int:
    """Input plus output footprint of one cell."""
    area = spatial * spatial
    return (batch * channels * area + batch * num_pairs(channels) * area) * itemsize


def time_call(fn, warmups: int, repeats: int) -> float:
    """Median of `repeats` perf_counter timings after `warmups` untimed calls."""
    for _ in range(warmups):
        fn()
    samples = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - start)
    return float(np.median(samples))


def benchmark_grid(
    grid: Dict[str, List[int]],
    strategies: Sequence[str] = ("naive", "direct", "parity"),
    repeats: int = DEFAULT_REPEATS,
    warmups: int = DEFAULT_WARMUPS,
    workers: Optional[int] = None,
    seed: int = 0,
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP,
    dtype=np.float32,
) -> List[BenchRecord]:
    """
    Time every strategy on every (batch, channels, spatial) cell.

    Each strategy's output checksum must equal the vectorized reference
    before its timing is recorded. Cells above the memory cap are skipped
    with a flagged record.

    Raises:
        InvalidArgumentError: repeats < 5 or unknown strategy
        SchedulerError: A strategy produced a different output
    """
    if repeats < MIN_REPEATS:
        raise InvalidArgumentError(f"Benchmarks need at least {MIN_REPEATS} repeats, got {repeats}")
    parsed = [Strategy.parse(s) for s in strategies]
    workers = workers or default_workers()
    rng = np.random.default_rng(seed)
    records: List[BenchRecord] = []

    cells = list(itertools.product(grid["batch"], grid["channels"], grid["spatial"]))
    logger.info("Benchmarking %d cells x %d strategies on %d workers", len(cells), len(parsed), workers)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        for batch, channels, spatial in cells:
            if cell_bytes(batch, channels, spatial, np.dtype(dtype).itemsize) > memory_cap_bytes:
                logger.warning("Skipping cell batch=%d channels=%d spatial=%d (memory cap)",
                               batch, channels, spatial)
                records.extend(
                    BenchRecord(batch, channels, spatial, s.value, float("nan"), skipped=True)
                    for s in parsed
                )
                continue

            z = rng.standard_normal((batch, channels, spatial, spatial)).astype(dtype)
            expected = checksum(reference_expand(z))

            for strategy in parsed:
                plan = plan_dispatch(strategy, channels, workers)
                got = checksum(run_dispatch(z, plan, executor=pool))
                if got != expected:
                    raise SchedulerError(
                        f"{strategy.value} output differs from reference on "
                        f"batch={batch} channels={channels} spatial={spatial}"
                    )
                median = time_call(lambda: run_dispatch(z, plan, executor=pool), warmups, repeats)
                records.append(BenchRecord(batch, channels, spatial, strategy.value, median, got))
                logger.debug("%s %s: %s", strategy.value, (batch, channels, spatial), format_dt(median))

    check_monotone(records)
    return records


def check_monotone(records: Sequence[BenchRecord]) -> List[Tuple[str, Tuple[int, int, int]]]:
    """
    Soft check: medians should not fall as element counts grow.

    Returns the offending (strategy, cell) pairs after logging a warning.
    """
    offenders = []
    by_strategy: Dict[str, List[BenchRecord]] = {}
    for r in records:
        if not r.skipped:
            by_strategy.setdefault(r.strategy, []).append(r)
    for strategy, rows in by_strategy.items():
        rows = sorted(rows, key=lambda r: r.elements)
        for prev, cur in zip(rows, rows[1:]):
            if cur.elements > prev.elements and cur.median_s < prev.median_s:
                offenders.append((strategy, cur.cell))
    if offenders:
        logger.warning("Timing not monotone in element count for %d cells (machine noise?)", len(offenders))
    return offenders


def heatmap_rows(records: Sequence[BenchRecord], a: str = "direct", b: str = "parity",
                 eps: float = HEATMAP_EPS) -> List[HeatmapCell]:
    """
    (t_a - t_b) / (t_a + t_b + eps) for every cell timed under both strategies.

    Cells missing a counterpart are omitted with a warning.
    """
    a, b = Strategy.parse(a).value, Strategy.parse(b).value
    times: Dict[Tuple[int, int, int], Dict[str, float]] = {}
    for r in records:
        if not r.skipped and r.strategy in (a, b):
            times.setdefault(r.cell, {})[r.strategy] = r.median_s

    cells = []
    missing = 0
    for cell in sorted(times):
        pair = times[cell]
        if a not in pair or b not in pair:
            missing += 1
            continue
        ta, tb = pair[a], pair[b]
        cells.append(HeatmapCell(*cell, value=(ta - tb) / (ta + tb + eps)))
    if missing:
        logger.warning("Heatmap omitted %d cells without both %s and %s timings", missing, a, b)
    return cells
