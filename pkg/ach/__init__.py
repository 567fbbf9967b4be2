"""
Hadaptive - ACH Module
Adaptive Cross-Hadamard layer, differentiable sampling, bounded normalization,
Ghost expansion and the Adaptive Bottleneck
"""

from .operator import (
    ACHLayer,
    EcaScorer,
    eca_scores,
    select_channels,
    mapping_matrices,
    dense_select,
    cross_hadamard_expand,
    tile_rows,
)
from .ghost import GhostModule, ghost_forward
from .bottleneck import AdaptiveBottleneck

# Sampling
from .sampling import (
    UNIFORM_EPS,
    SteAnchor,
    gumbel_noise,
    module_stream,
    sample_gumbel,
    soft_probs,
    topk_indices,
    hard_topk_ste,
    inference_select,
    adjust_tau,
    adjust_tau_for_epoch,
    anneal_tau,
)

# Normalization
from .normalization import (
    DyNorm,
    dynorm_forward,
    curve_value,
    curve_slope,
    cross_hadamard_moments,
    self_hadamard_moments,
    linear_map_moments,
    map_statistics,
)

# Type definitions
from .types import (
    TAU_INIT,
    TAU_MIN,
    TAU_MAX,
    TAU_ALPHA,
    NormVariant,
    SelectionMode,
    AnnealKind,
    AchConfig,
    GhostConfig,
    BlockSpec,
    SelectionState,
    AnnealSchedule,
    MomentPair,
    MappingMatrices,
)

__all__ = [
    # Layers
    'ACHLayer',
    'EcaScorer',
    'eca_scores',
    'select_channels',
    'mapping_matrices',
    'dense_select',
    'cross_hadamard_expand',
    'tile_rows',
    'GhostModule',
    'ghost_forward',
    'AdaptiveBottleneck',
    # Sampling
    'UNIFORM_EPS',
    'SteAnchor',
    'gumbel_noise',
    'module_stream',
    'sample_gumbel',
    'soft_probs',
    'topk_indices',
    'hard_topk_ste',
    'inference_select',
    'adjust_tau',
    'adjust_tau_for_epoch',
    'anneal_tau',
    # Normalization
    'DyNorm',
    'dynorm_forward',
    'curve_value',
    'curve_slope',
    'cross_hadamard_moments',
    'self_hadamard_moments',
    'linear_map_moments',
    'map_statistics',
    # Types
    'TAU_INIT',
    'TAU_MIN',
    'TAU_MAX',
    'TAU_ALPHA',
    'NormVariant',
    'SelectionMode',
    'AnnealKind',
    'AchConfig',
    'GhostConfig',
    'BlockSpec',
    'SelectionState',
    'AnnealSchedule',
    'MomentPair',
    'MappingMatrices',
]
