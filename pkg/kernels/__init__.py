"""
Hadaptive - Kernels Module
Pair indexing, dispatch strategies and benchmarks for cross-Hadamard expansion
"""

from .pairing import (
    num_pairs,
    pair_from_index,
    index_from_pair,
    pair_table,
    iter_pairs,
    parity_blocks,
    block_size_spread,
)
from .scheduler import (
    default_workers,
    plan_dispatch,
    run_dispatch,
    reference_expand,
    checksum,
)
from .benchmark import (
    HeatmapCell,
    parse_grid,
    benchmark_grid,
    check_monotone,
    heatmap_rows,
    format_dt,
)

# Type definitions
from .types import (
    Pair,
    Strategy,
    PairMap,
    BlockAssignment,
    DispatchPlan,
    BenchRecord,
)

__all__ = [
    # Pairing
    'num_pairs',
    'pair_from_index',
    'index_from_pair',
    'pair_table',
    'iter_pairs',
    'parity_blocks',
    'block_size_spread',
    # Scheduling
    'default_workers',
    'plan_dispatch',
    'run_dispatch',
    'reference_expand',
    'checksum',
    # Benchmarks
    'HeatmapCell',
    'parse_grid',
    'benchmark_grid',
    'check_monotone',
    'heatmap_rows',
    'format_dt',
    # Types
    'Pair',
    'Strategy',
    'PairMap',
    'BlockAssignment',
    'DispatchPlan',
    'BenchRecord',
]
