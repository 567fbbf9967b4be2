"""
ACH - Adaptive Bottleneck
Expansion (Ghost or ACH), depthwise k x k, pointwise projection, residual.
"""

import logging
from typing import Optional

import numpy as np

from engine.exceptions import ConfigurationError
from engine.layers import BatchNorm, Module, kaiming_normal
from engine.ops import add, depthwise_conv, hardswish, pointwise_conv, relu
from engine.tensor import Parameter, Tape, Tensor, resolve_dtype, use

from .ghost import GhostModule
from .operator import ACHLayer
from .sampling import SteAnchor
from .types import AchConfig, BlockSpec, GhostConfig, NormVariant, SelectionMode

logger = logging.getLogger(__name__)

ACTIVATIONS = {"relu": relu, "hardswish": hardswish}


class AdaptiveBottleneck(Module):
    """
    Inverted bottleneck whose expansion layer is chosen per block.

    Ghost: ghost expansion -> BN -> act. Hada: ACH layer (normalized inside),
    optionally without its pointwise conv.
    Then depthwise (stride) -> BN -> act -> projection -> BN, plus the
    input when stride is 1 and the widths match.
    """

    def __init__(
        self,
        spec: BlockSpec,
        rng: np.random.Generator,
        seed: int = 0,
        dtype=None,
        name: str = "ab",
        act: str = "relu",
        eca_kernel: int = 3,
        norm_variant: NormVariant = NormVariant.SOFTSIGN,
        selection: SelectionMode = SelectionMode.ECA,
        ach_init: str = "random",
        ach_pointwise: bool = True,
        tau: float = 1.0,
    ):
        if act not in ACTIVATIONS:
            raise ConfigurationError(f"Unknown activation '{act}'. Use one of: {', '.join(ACTIVATIONS)}")
        if spec.kernel % 2 == 0:
            # even kernels only exist in the static cost tables
            raise ConfigurationError(f"Trainable bottleneck needs an odd depthwise kernel, got {spec.kernel}")
        self.spec = spec
        self.name = name
        self.act = act
        dt = resolve_dtype(dtype)

        self.ach: Optional[ACHLayer] = None
        self.ghost: Optional[GhostModule] = None
        self.bn_exp: Optional[BatchNorm] = None
        if spec.kind == "Hada":
            cfg = AchConfig(c_in=spec.c_in, c_sel=int(spec.arg), eca_kernel=eca_kernel,
                            norm_variant=norm_variant, selection=selection, pointwise=ach_pointwise)
            self.ach = ACHLayer(cfg, rng=rng, seed=seed, dtype=dt, name=f"{name}.ach",
                                init=ach_init, tau=tau)
        else:
            gcfg = GhostConfig.from_ratio(spec.c_in, float(spec.arg))
            self.ghost = GhostModule(gcfg, rng, dtype=dt, name=f"{name}.ghost")
            self.bn_exp = BatchNorm(gcfg.c_out, dtype=dt, name=f"{name}.bn_exp")

        hidden = self.hidden_channels
        k = spec.kernel
        self.dw = Parameter(kaiming_normal(rng, (hidden, k, k), k * k), name=f"{name}.dw", dtype=dt)
        self.bn_dw = BatchNorm(hidden, dtype=dt, name=f"{name}.bn_dw")
        self.proj = Parameter(kaiming_normal(rng, (spec.c_out, hidden), hidden), name=f"{name}.proj", dtype=dt)
        self.bn_proj = BatchNorm(spec.c_out, dtype=dt, name=f"{name}.bn_proj")

    @property
    def hidden_channels(self) -> int:
        if self.ach is not None:
            return self.ach.out_channels
        return self.ghost.out_channels

    def forward(
        self,
        x: Tensor,
        tape: Optional[Tape] = None,
        training: bool = True,
        noise: Optional[np.ndarray] = None,
        anchor: Optional[SteAnchor] = None,
    ) -> Tensor:
        if not training:
            tape = None
            x = x.detach()
        act = ACTIVATIONS[self.act]
        if self.ach is not None:
            e = self.ach.forward(x, tape, training, noise=noise, anchor=anchor)
        else:
            e = act(self.bn_exp.forward(self.ghost.forward(x, tape), tape, training))

        d = depthwise_conv(e, use(self.dw, tape), stride=self.spec.stride)
        d = act(self.bn_dw.forward(d, tape, training))
        out = self.bn_proj.forward(pointwise_conv(d, use(self.proj, tape)), tape, training)
        if self.spec.residual:
            out = add(out, x)
        return out
