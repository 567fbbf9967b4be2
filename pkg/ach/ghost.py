"""
ACH - Ghost Expansion
Primary channels from a pointwise conv, the rest from cheap depthwise
transforms of the primaries.
"""

from typing import Optional

import numpy as np

from engine.exceptions import InvalidArgumentError
from engine.layers import Module, kaiming_normal
from engine.ops import concat, depthwise_conv, gather_channels, pointwise_conv
from engine.tensor import Parameter, Tape, Tensor, resolve_dtype, use

from .types import GhostConfig


def ghost_forward(x: Tensor, cfg: GhostConfig, primary_weight: Tensor,
                  cheap_weight: Optional[Tensor]) -> Tensor:
    """
    Ghost expansion m -> n.

    Ghost channel g is the depthwise transform of primary g mod s.
    Output is primaries followed by ghosts.

    Args:
        x: Input [N, m, H, W]
        cfg: Ghost configuration
        primary_weight: Pointwise weights [s, m]
        cheap_weight: Depthwise kernels [n - s, k, k] (None when s == n)
    """
    if x.ndim != 4 or x.shape[1] != cfg.c_in:
        raise InvalidArgumentError(f"ghost_forward: expected [N, {cfg.c_in}, H, W], got {x.shape}")
    primary = pointwise_conv(x, primary_weight)
    if cfg.ghosts == 0:
        return primary
    if cheap_weight is None:
        raise InvalidArgumentError("ghost_forward: cheap-op weights missing")
    source = gather_channels(primary, np.arange(cfg.ghosts) % cfg.primary)
    return concat([primary, depthwise_conv(source, cheap_weight, stride=1)], axis=1)


class GhostModule(Module):
    """Trainable Ghost expansion."""

    def __init__(self, cfg: GhostConfig, rng: np.random.Generator, dtype=None, name: str = "ghost"):
        self.cfg = cfg
        dt = resolve_dtype(dtype)
        self.primary = Parameter(kaiming_normal(rng, (cfg.primary, cfg.c_in), cfg.c_in),
                                 name=f"{name}.primary", dtype=dt)
        self.cheap: Optional[Parameter] = None
        if cfg.ghosts:
            k = cfg.kernel
            self.cheap = Parameter(kaiming_normal(rng, (cfg.ghosts, k, k), k * k),
                                   name=f"{name}.cheap", dtype=dt)

    @property
    def out_channels(self) -> int:
        return self.cfg.c_out

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        cheap = use(self.cheap, tape) if self.cheap is not None else None
        return ghost_forward(x, self.cfg, use(self.primary, tape), cheap)
