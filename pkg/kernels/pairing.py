"""
Kernels - Pair Indexing
Closed-form bijection between linear pair index and unordered channel pair,
plus the parity-balanced per-block pair iteration.
"""

import math
from typing import Iterable, List, Tuple

import numpy as np

from engine.exceptions import InvalidArgumentError

from .types import BlockAssignment, Pair, PairMap


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def _row_start(i: int, n: int) -> int:
    """Linear index of the first pair (i, i+1) of row i."""
    return i * (2 * n - 1 - i) // 2


def pair_from_index(p: int, n: int) -> Pair:
    """
    Map a linear index to its pair (i, j), i < j, row-major over i.

    i = floor(((2n-1) - sqrt((2n-1)^2 - 8p)) / 2), evaluated with an
    integer square root and corrected against the row starts, so it is
    exact for any n.

    Args:
        p: Pair index in [0, n(n-1)/2)
        n: Channel count, n >= 2

    Returns:
        (i, j) with 0 <= i < j < n

    Raises:
        InvalidArgumentError: If n < 2 or p is out of range
    """
    if n < 2:
        raise InvalidArgumentError(f"Pair index needs n >= 2, got {n}")
    total = num_pairs(n)
    if not 0 <= p < total:
        raise InvalidArgumentError(f"Pair index p must be in [0, {total}), got {p}")

    b = 2 * n - 1
    r = math.isqrt(b * b - 8 * p)
    i = max(0, (b - r) // 2)
    # isqrt floors; at most one step of correction either way
    while i > 0 and _row_start(i, n) > p:
        i -= 1
    while _row_start(i + 1, n) <= p:
        i += 1
    j = i + 1 + p - _row_start(i, n)
    return i, j


def index_from_pair(i: int, j: int, n: int) -> int:
    """
    Inverse of pair_from_index: p = i(2n - i - 1)/2 + (j - i - 1).

    Raises:
        InvalidArgumentError: Unless 0 <= i < j < n
    """
    if not 0 <= i < j < n:
        raise InvalidArgumentError(f"Pair must satisfy 0 <= i < j < n, got i={i}, j={j}, n={n}")
    return _row_start(i, n) + (j - i - 1)


def pair_table(n: int) -> np.ndarray:
    """All pairs of n channels as an int array [n(n-1)/2, 2], row-major."""
    PairMap(n)
    rows, cols = np.triu_indices(n, k=1)
    return np.stack([rows, cols], axis=1).astype(np.intp)


def iter_pairs(n: int) -> Iterable[Tuple[int, Pair]]:
    """(p, (i, j)) for every pair, in index order."""
    for p in range(num_pairs(n)):
        yield p, pair_from_index(p, n)


def parity_blocks(c: int) -> List[BlockAssignment]:
    """
    Split the pairs of c channels into c blocks by index-difference parity.

    Block `id` owns (it, id) for it < id with an even difference and
    (id, it) for it > id with an odd difference. Every pair lands in
    exactly one block and block sizes differ by at most one.

    Raises:
        InvalidArgumentError: If c < 2
    """
    if c < 2:
        raise InvalidArgumentError(f"Parity blocks need c >= 2, got {c}")
    blocks = []
    for block_id in range(c):
        pairs = []
        for it in range(c):
            if it < block_id and (block_id - it) % 2 == 0:
                pairs.append((it, block_id))
            elif it > block_id and (it - block_id) % 2 == 1:
                pairs.append((block_id, it))
        blocks.append(BlockAssignment(block_id=block_id, pairs=pairs))
    return blocks


def block_size_spread(blocks: List[BlockAssignment]) -> int:
    sizes = [len(b) for b in blocks]
    return max(sizes) - min(sizes) if sizes else 0
