"""
Kernels - Shared Type Definitions
Pair maps, block assignments, dispatch plans and benchmark records.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

from engine.exceptions import InvalidArgumentError

Pair = Tuple[int, int]


class Strategy(Enum):
    """Dispatch strategies for the cross-Hadamard expansion."""
    NAIVE = "naive"
    DIRECT = "direct"
    PARITY = "parity"

    @classmethod
    def parse(cls, value) -> "Strategy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(s.value for s in cls)
            raise InvalidArgumentError(f"Unknown strategy '{value}'. Use one of: {names}") from None


@dataclass(frozen=True)
class PairMap:
    """
    Unordered channel pairs of n channels, row-major with i < j.

    Attributes:
        n: Candidate channel count
    """
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise InvalidArgumentError(f"Pair map needs n >= 2, got {self.n}")

    @property
    def total(self) -> int:
        return self.n * (self.n - 1) // 2


@dataclass
class BlockAssignment:
    """
    Pairs handled by one logical block.

    Attributes:
        block_id: Block index in [0, c)
        pairs: Ordered (i, j) pairs, i < j
    """
    block_id: int
    pairs: List[Pair] = field(default_factory=list)

    def __post_init__(self):
        if self.block_id < 0:
            raise InvalidArgumentError(f"Block id must be non-negative, got {self.block_id}")

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class DispatchPlan:
    """
    Assignment of every Hadamard pair to a worker.

    Attributes:
        strategy: Dispatch strategy that produced the plan
        workers: Worker count
        channels: Selected channel count C_s
        blocks: Logical blocks, in creation order
        assignments: Per-worker list of blocks (round-robin over blocks)
    """
    strategy: Strategy
    workers: int
    channels: int
    blocks: List[BlockAssignment] = field(default_factory=list)
    assignments: List[List[BlockAssignment]] = field(default_factory=list)

    def __post_init__(self):
        if self.workers < 1:
            raise InvalidArgumentError(f"Worker count must be positive, got {self.workers}")
        if self.channels < 2:
            raise InvalidArgumentError(f"Dispatch needs at least 2 channels, got {self.channels}")

    @property
    def total_pairs(self) -> int:
        return self.channels * (self.channels - 1) // 2

    def worker_pairs(self, worker: int) -> List[Pair]:
        """Flattened pair list of one worker, in execution order."""
        return [pair for block in self.assignments[worker] for pair in block.pairs]


@dataclass
class BenchRecord:
    """
    One timed cell of a benchmark grid.

    Attributes:
        batch: Batch size N
        channels: Selected channel count C_s
        spatial: Spatial side (H = W)
        strategy: Strategy value string
        median_s: Median wall time in seconds (nan when skipped)
        checksum: sha256 hex digest of the output
        skipped: True when the cell exceeded the memory cap
    """
    batch: int
    channels: int
    spatial: int
    strategy: str
    median_s: float
    checksum: str = ""
    skipped: bool = False

    def __post_init__(self):
        if self.batch < 1 or self.channels < 2 or self.spatial < 1:
            raise InvalidArgumentError(
                f"Invalid bench cell: batch={self.batch}, channels={self.channels}, spatial={self.spatial}"
            )

    @property
    def cell(self) -> Tuple[int, int, int]:
        return (self.batch, self.channels, self.spatial)

    @property
    def elements(self) -> int:
        """Output elements of the expansion for this cell."""
        pairs = self.channels * (self.channels - 1) // 2
        return self.batch * pairs * self.spatial * self.spatial
