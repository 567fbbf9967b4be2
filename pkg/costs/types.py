"""
Costs - Shared Type Definitions
Expansion specs, layer entries of an architecture file, and cost records.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple, Union

from engine.exceptions import ConfigurationError, InvalidArgumentError

from ach.types import BlockSpec


@dataclass
class ExpansionSpec:
    """
    Channel expansion m -> n on an f x f map.

    Attributes:
        m: Input channels
        n: Output channels
        f: Spatial side
        k: Cheap-op kernel (Ghost)
        s: Ghost primary channels (defaults to n/2)
    """
    m: int
    n: int
    f: int
    k: int = 3
    s: Optional[int] = None

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.f < 1 or self.k < 1:
            raise InvalidArgumentError(
                f"Expansion spec needs positive m, n, f, k, got m={self.m}, n={self.n}, f={self.f}, k={self.k}"
            )
        if self.s is None:
            self.s = max(1, self.n // 2)
        if not 1 <= self.s <= self.n:
            raise InvalidArgumentError(f"Primary channels s must be in [1, {self.n}], got {self.s}")

    @property
    def ratio(self) -> float:
        return self.n / self.m


@dataclass
class CnaLayer:
    """Conv + norm + activation: k x k conv, stride, optional BN."""
    c_in: int
    c_out: int
    kernel: int
    stride: int
    norm: str = "BN"
    act: str = "None"

    def __post_init__(self):
        if min(self.c_in, self.c_out, self.kernel, self.stride) < 1:
            raise ConfigurationError(f"CNA values must be positive: {self.c_in} {self.c_out} {self.kernel} {self.stride}")
        if self.norm not in ("BN", "None"):
            raise ConfigurationError(f"CNA norm must be BN or None, got {self.norm}")


@dataclass
class FnLayer:
    """Global pool, hidden fully connected layer, classifier."""
    c_in: int
    classes: int
    hidden: int
    dropout: float = 0.0

    def __post_init__(self):
        if min(self.c_in, self.classes, self.hidden) < 1:
            raise ConfigurationError(f"FN sizes must be positive: {self.c_in} {self.classes} {self.hidden}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"FN dropout must be in [0, 1), got {self.dropout}")


ArchLayer = Union[CnaLayer, BlockSpec, FnLayer]


@dataclass
class ArchSpec:
    """Parsed architecture file (layers in order, with source line numbers)."""
    layers: List[ArchLayer] = field(default_factory=list)
    lines: List[int] = field(default_factory=list)
    name: str = "model"


@dataclass
class LayerCost:
    """
    Parameter and MAC count of one layer item.

    Attributes:
        name: Item label, e.g. "6.AB.expand"
        kind: CNA, AB or FN
        params: Learnable parameters
        macs: Multiply-accumulates
        out_shape: (C, H, W) after the item
    """
    name: str
    kind: str
    params: int
    macs: int
    out_shape: Tuple[int, int, int]

    def __post_init__(self):
        if self.params < 0 or self.macs < 0:
            raise InvalidArgumentError(f"{self.name}: costs must be non-negative")

    @property
    def flops(self) -> int:
        return 2 * self.macs


@dataclass
class CostReport:
    """Per-item costs and totals of one architecture at one resolution."""
    name: str
    input_size: int
    layers: List[LayerCost] = field(default_factory=list)

    @property
    def total_params(self) -> int:
        return sum(layer.params for layer in self.layers)

    @property
    def total_macs(self) -> int:
        return sum(layer.macs for layer in self.layers)

    @property
    def total_flops(self) -> int:
        return 2 * self.total_macs

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "input_size": self.input_size,
            "layers": [
                {
                    "name": layer.name,
                    "kind": layer.kind,
                    "params": layer.params,
                    "macs": layer.macs,
                    "flops": layer.flops,
                    "out_shape": list(layer.out_shape),
                }
                for layer in self.layers
            ],
            "total_params": self.total_params,
            "total_macs": self.total_macs,
            "total_flops": self.total_flops,
        }


@dataclass
class CurvePoint:
    """One point of a ratio curve (MACs; FLOPs are twice these)."""
    mode: str
    m: int
    n: int
    f: int
    macs_pointwise: int
    macs_ghost: int
    macs_ach: int

    @property
    def r(self) -> float:
        return self.n / self.m

    @property
    def ratio_ghost(self) -> float:
        return self.macs_ghost / self.macs_pointwise

    @property
    def ratio_ach(self) -> float:
        return self.macs_ach / self.macs_pointwise
