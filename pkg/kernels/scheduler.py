"""
Kernels - Dispatch Scheduler
Cross-Hadamard expansion executed on a thread pool under the naive,
direct-indexing and parity-balanced strategies.
"""

import hashlib
import logging
import os
from concurrent.futures import Executor, ThreadPoolExecutor
from typing import List, Optional, Union

import numpy as np

from engine.exceptions import InvalidArgumentError
from engine.tensor import Tensor

from .pairing import index_from_pair, num_pairs, pair_from_index, pair_table, parity_blocks
from .types import BlockAssignment, DispatchPlan, Strategy

logger = logging.getLogger(__name__)


def default_workers() -> int:
    return os.cpu_count() or 1


def plan_dispatch(strategy: Union[Strategy, str], channels: int, workers: int = 1) -> DispatchPlan:
    """
    Build the block list of a strategy and map blocks onto workers.

    naive puts every pair in one block on worker 0; direct makes one block
    per pair; parity makes one block per channel. Blocks go to workers
    round-robin by block id.

    Args:
        strategy: naive, direct or parity
        channels: Selected channel count C_s (>= 2)
        workers: Worker count (>= 1)

    Returns:
        DispatchPlan, a pure function of its arguments
    """
    strategy = Strategy.parse(strategy)
    plan = DispatchPlan(strategy=strategy, workers=workers, channels=channels)

    if strategy is Strategy.NAIVE:
        pairs = [pair_from_index(p, channels) for p in range(num_pairs(channels))]
        blocks = [BlockAssignment(block_id=0, pairs=pairs)]
    elif strategy is Strategy.DIRECT:
        blocks = [
            BlockAssignment(block_id=p, pairs=[pair_from_index(p, channels)])
            for p in range(num_pairs(channels))
        ]
    else:
        blocks = parity_blocks(channels)

    plan.blocks = blocks
    plan.assignments = [[] for _ in range(workers)]
    for block in blocks:
        plan.assignments[block.block_id % workers].append(block)
    return plan


def _run_worker(zd: np.ndarray, out: np.ndarray, channels: int, blocks: List[BlockAssignment]) -> int:
    done = 0
    for block in blocks:
        for i, j in block.pairs:
            np.multiply(zd[:, i], zd[:, j], out=out[:, index_from_pair(i, j, channels)])
            done += 1
    return done


def run_dispatch(z: Union[Tensor, np.ndarray], plan: DispatchPlan,
                 executor: Optional[Executor] = None) -> Tensor:
    """
    Compute every pair product z[:, i] * z[:, j] into output channel p(i, j).

    Each output channel is written by exactly one worker, so the result is
    bit-identical for every strategy and worker count.

    Args:
        z: Selected features [N, C_s, H, W]
        plan: Dispatch plan for C_s channels
        executor: Pool to reuse; a temporary one is created when None

    Returns:
        Tensor [N, C_s(C_s-1)/2, H, W] (off any tape)
    """
    zd = z.data if isinstance(z, Tensor) else np.asarray(z)
    if zd.ndim != 4:
        raise InvalidArgumentError(f"run_dispatch expects [N, C, H, W], got {zd.shape}")
    if zd.shape[1] != plan.channels:
        raise InvalidArgumentError(f"Plan is for {plan.channels} channels, input has {zd.shape[1]}")

    n, c, h, w = zd.shape
    out = np.empty((n, num_pairs(c), h, w), dtype=zd.dtype)
    work = [blocks for blocks in plan.assignments if blocks]

    if plan.workers == 1 or len(work) <= 1:
        done = sum(_run_worker(zd, out, c, blocks) for blocks in work)
    elif executor is not None:
        futures = [executor.submit(_run_worker, zd, out, c, blocks) for blocks in work]
        done = sum(f.result() for f in futures)
    else:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            futures = [pool.submit(_run_worker, zd, out, c, blocks) for blocks in work]
            done = sum(f.result() for f in futures)

    if done != plan.total_pairs:
        raise InvalidArgumentError(f"Plan covered {done} of {plan.total_pairs} pairs")
    return Tensor._wrap(out)


def reference_expand(z: Union[Tensor, np.ndarray]) -> np.ndarray:
    """Vectorized pair products in index order (naive reference)."""
    zd = z.data if isinstance(z, Tensor) else np.asarray(z)
    table = pair_table(zd.shape[1])
    return zd[:, table[:, 0]] * zd[:, table[:, 1]]


def checksum(values: Union[Tensor, np.ndarray]) -> str:
    """sha256 over dtype, shape and raw bytes."""
    arr = np.ascontiguousarray(values.data if isinstance(values, Tensor) else values)
    digest = hashlib.sha256()
    digest.update(f"{arr.dtype.str}{arr.shape}".encode())
    digest.update(arr.tobytes())
    return digest.hexdigest()
