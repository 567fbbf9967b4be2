"""
Harness - Demo Network
Miniature Hadaptive net: per-channel stem, one ACH bottleneck that selects
straight from the image channels, pool, linear head.
"""

import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from engine.exceptions import ConfigurationError
from engine.layers import BatchNorm, Linear, Module
from engine.ops import depthwise_conv, global_avg_pool
from engine.tensor import Parameter, Tape, Tensor, resolve_dtype, use

from ach.bottleneck import AdaptiveBottleneck
from ach.operator import ACHLayer
from ach.types import BlockSpec, NormVariant, SelectionMode
from costs.arch_spec import ab_layers, load_arch_spec, parse_arch_spec

from .dataset import IMAGE_CHANNELS, NUM_CLASSES

logger = logging.getLogger(__name__)

# selection ids at the first ACH layer are image channel ids: nothing mixes
# channels before it (depthwise stem, no pointwise conv inside the layer)
DEMO_BLOCKS = """
AB 6 6 Hada 2 3 1
"""


class DemoNet(Module):
    """Channel-preserving stem, bottleneck stack, global pool, linear head."""

    def __init__(
        self,
        blocks: List[BlockSpec],
        seed: int = 0,
        dtype=None,
        norm_variant: Union[NormVariant, str] = NormVariant.SOFTSIGN,
        selection: Union[SelectionMode, str] = SelectionMode.ECA,
        eca_kernel: int = 3,
        tau: float = 1.0,
        classes: int = NUM_CLASSES,
        in_channels: int = IMAGE_CHANNELS,
        ach_pointwise: bool = False,
    ):
        if not blocks:
            raise ConfigurationError("Demo network needs at least one bottleneck")
        if blocks[0].c_in != in_channels:
            raise ConfigurationError(f"First block must take {in_channels} channels, got {blocks[0].c_in}")
        dt = resolve_dtype(dtype)
        rng = np.random.default_rng(seed)
        norm_variant = NormVariant.parse(norm_variant)
        selection = SelectionMode(selection)

        stem = np.zeros((in_channels, 3, 3))
        stem[:, 1, 1] = 1.0
        self.stem = Parameter(stem, name="stem.dw", dtype=dt)
        self.stem_bn = BatchNorm(in_channels, dtype=dt, name="stem.bn")
        self.blocks = [
            AdaptiveBottleneck(spec, rng, seed=seed, dtype=dt, name=f"ab{i}", eca_kernel=eca_kernel,
                               norm_variant=norm_variant, selection=selection,
                               ach_init="identity", ach_pointwise=ach_pointwise, tau=tau)
            for i, spec in enumerate(blocks)
        ]
        self.head = Linear(blocks[-1].c_out, classes, rng, dtype=dt, name="head")

    @property
    def ach_layers(self) -> List[ACHLayer]:
        return [b.ach for b in self.blocks if b.ach is not None]

    def configure_batch_norm(self, eps: float, momentum: float) -> None:
        for m in self.modules():
            if isinstance(m, BatchNorm):
                m.state.eps = eps
                m.state.momentum = momentum

    def forward(self, x: Tensor, tape: Optional[Tape] = None, training: bool = True) -> Tensor:
        if not training:
            tape = None
            x = x.detach()
        h = self.stem_bn.forward(depthwise_conv(x, use(self.stem, tape)), tape, training)
        for block in self.blocks:
            h = block.forward(h, tape, training)
        return self.head.forward(global_avg_pool(h), tape)


def demo_blocks(arch: Optional[Union[str, Path]] = None) -> List[BlockSpec]:
    spec = load_arch_spec(arch) if arch is not None else parse_arch_spec(DEMO_BLOCKS, name="demo")
    blocks = ab_layers(spec)
    if len(blocks) != len(spec.layers):
        raise ConfigurationError("Demo architecture may only contain AB rows")
    return blocks


def build_demo_net(seed: int = 0, dtype=None, arch: Optional[Union[str, Path]] = None, **kwargs) -> DemoNet:
    blocks = demo_blocks(arch)
    kwargs.setdefault("in_channels", blocks[0].c_in)
    net = DemoNet(blocks, seed=seed, dtype=dtype, **kwargs)
    logger.debug("Demo net: %d parameters, %d ACH layers", net.num_parameters(), len(net.ach_layers))
    return net
