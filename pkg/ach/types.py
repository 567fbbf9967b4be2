"""
ACH - Shared Type Definitions
Layer configurations, selection state, schedules and moment pairs.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Union

import numpy as np

from engine.exceptions import ConfigurationError, InvalidArgumentError
from engine.tensor import Tensor

TAU_INIT = 1.0
TAU_MIN = 0.01
TAU_MAX = 4.0
TAU_ALPHA = 0.01
ECA_KERNEL = 3


class NormVariant(Enum):
    """Normalization applied to the cross-Hadamard products."""
    SOFTSIGN = "softsign"
    SIGMOID = "sigmoid"
    ALGEBRAIC = "algebraic"
    BATCHNORM = "batchnorm"

    @classmethod
    def parse(cls, value: Union[str, "NormVariant"]) -> "NormVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ConfigurationError(f"Unknown norm variant '{value}'. Use one of: {names}") from None

    @property
    def is_curve(self) -> bool:
        return self is not NormVariant.BATCHNORM


class SelectionMode(Enum):
    """Where the channel scores come from."""
    ECA = "eca"        # learned from the input (adaptive)
    FREE = "free"      # learnable per-channel logits, no ECA
    FIXED = "fixed"    # frozen random channel subset


class AnnealKind(Enum):
    """Predefined temperature decay curves."""
    LINEAR = "linear"
    EXPONENTIAL = "exponential"
    COSINE = "cosine"


@dataclass
class AchConfig:
    """
    Static description of one ACH layer.

    Attributes:
        c_in: Input channels C
        c_sel: Selected channels C_s
        eca_kernel: Odd width of the channel conv in ECA
        norm_variant: Normalization of the products
        noise_enabled: Gumbel noise on the training path
        selection: Score source (ECA, free logits, fixed subset)
        pointwise: Mix channels with a learnable 1x1 conv before the batch norm
    """
    c_in: int
    c_sel: int
    eca_kernel: int = ECA_KERNEL
    norm_variant: NormVariant = NormVariant.SOFTSIGN
    noise_enabled: bool = True
    selection: SelectionMode = SelectionMode.ECA
    pointwise: bool = True

    def __post_init__(self):
        self.norm_variant = NormVariant.parse(self.norm_variant)
        self.selection = SelectionMode(self.selection)
        if self.c_in < 2:
            raise ConfigurationError(f"ACH needs at least 2 input channels, got {self.c_in}")
        if not 2 <= self.c_sel <= self.c_in:
            raise ConfigurationError(f"Selected channels must be in [2, {self.c_in}], got {self.c_sel}")
        if self.eca_kernel < 1 or self.eca_kernel % 2 == 0:
            raise ConfigurationError(f"ECA kernel must be odd and positive, got {self.eca_kernel}")

    @property
    def num_products(self) -> int:
        return self.c_sel * (self.c_sel - 1) // 2

    @property
    def out_channels(self) -> int:
        return self.c_in + self.num_products


@dataclass
class GhostConfig:
    """
    Ghost expansion m -> n with s primary channels.

    Attributes:
        c_in: Input channels m
        c_out: Output channels n
        primary: Primary channels s from the pointwise conv
        kernel: Cheap depthwise kernel k
        replication: Ghosts generated per primary channel
    """
    c_in: int
    c_out: int
    primary: int
    kernel: int = 3
    replication: int = 1

    def __post_init__(self):
        if self.c_in < 1:
            raise ConfigurationError(f"Ghost input channels must be positive, got {self.c_in}")
        if not 1 <= self.primary <= self.c_out:
            raise ConfigurationError(f"Primary channels must be in [1, {self.c_out}], got {self.primary}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ConfigurationError(f"Cheap-op kernel must be odd, got {self.kernel}")
        if self.replication < 1:
            raise ConfigurationError(f"Replication must be positive, got {self.replication}")
        if self.ghosts > self.primary * self.replication:
            raise ConfigurationError(
                f"{self.ghosts} ghost channels exceed {self.primary} primaries x {self.replication}"
            )

    @property
    def ghosts(self) -> int:
        return self.c_out - self.primary

    @classmethod
    def from_ratio(cls, c_in: int, ratio: float, kernel: int = 3) -> "GhostConfig":
        """Expansion to round(c_in * ratio) channels, half of them primary."""
        c_out = int(round(c_in * ratio))
        if c_out < 1:
            raise ConfigurationError(f"Ghost ratio {ratio} leaves no channels for {c_in} inputs")
        return cls(c_in=c_in, c_out=c_out, primary=c_out - c_out // 2, kernel=kernel)


@dataclass
class BlockSpec:
    """
    One Adaptive Bottleneck row: expansion, depthwise, projection.

    Attributes:
        c_in: Input channels
        c_out: Output channels
        kind: "Ghost" (arg = expansion ratio) or "Hada" (arg = C_s)
        arg: Expansion ratio or selected-channel count
        kernel: Depthwise kernel size
        stride: Depthwise stride (1 or 2)
    """
    c_in: int
    c_out: int
    kind: str
    arg: float
    kernel: int = 3
    stride: int = 1

    def __post_init__(self):
        kind = str(self.kind).strip().strip("'\"").lower()
        if kind not in ("ghost", "hada"):
            raise ConfigurationError(f"Bottleneck kind must be Ghost or Hada, got {self.kind}")
        self.kind = "Ghost" if kind == "ghost" else "Hada"
        if self.c_in < 1 or self.c_out < 1:
            raise ConfigurationError(f"Bottleneck channels must be positive: {self.c_in}->{self.c_out}")
        if self.kernel < 1:
            raise ConfigurationError(f"Depthwise kernel must be positive, got {self.kernel}")
        if self.stride not in (1, 2):
            raise ConfigurationError(f"Stride must be 1 or 2, got {self.stride}")
        if self.kind == "Hada":
            if float(self.arg) != int(self.arg):
                raise ConfigurationError(f"Hada argument must be an integer channel count, got {self.arg}")
            self.arg = int(self.arg)
            if not 2 <= self.arg <= self.c_in:
                raise ConfigurationError(f"Hada selects {self.arg} of {self.c_in} channels")
        elif self.arg <= 0:
            raise ConfigurationError(f"Ghost ratio must be positive, got {self.arg}")

    @property
    def residual(self) -> bool:
        return self.stride == 1 and self.c_in == self.c_out

    @property
    def hidden_channels(self) -> int:
        """Expansion width entering the depthwise stage."""
        if self.kind == "Hada":
            s = int(self.arg)
            return self.c_in + s * (s - 1) // 2
        return int(round(self.c_in * self.arg))


@dataclass
class SelectionState:
    """
    Channel selection of one ACH layer.

    Score, probability and mask snapshots are from the last forward pass and
    carry a leading batch axis. tau and tau_hist persist across passes.

    Attributes:
        k: Selected channel count C_s
        tau: Softmax temperature
        tau_hist: Last observed gradient norm (0 before the first update)
        alpha: Adaptation rate of adjust_tau
        xi: Channel scores [N, C]
        probs: Soft distribution [N, C]
        hard: 0/1 mask [N, C] with exactly k ones per row
        indices: Selected ids [N, k], ascending
        grad_norms: Norms observed since the last adjust_tau
    """
    k: int
    tau: float = TAU_INIT
    tau_hist: float = 0.0
    alpha: float = TAU_ALPHA
    tau_min: float = TAU_MIN
    tau_max: float = TAU_MAX
    xi: Optional[Tensor] = None
    probs: Optional[Tensor] = None
    hard: Optional[Tensor] = None
    indices: Optional[np.ndarray] = None
    grad_norms: List[float] = field(default_factory=list)

    def __post_init__(self):
        if self.k < 1:
            raise InvalidArgumentError(f"Selection size k must be positive, got {self.k}")
        if not 0 < self.tau_min <= self.tau_max:
            raise InvalidArgumentError(f"Need 0 < tau_min <= tau_max, got {self.tau_min}, {self.tau_max}")
        if not self.tau_min <= self.tau <= self.tau_max:
            raise InvalidArgumentError(f"tau must be in [{self.tau_min}, {self.tau_max}], got {self.tau}")
        if self.alpha < 0:
            raise InvalidArgumentError(f"alpha must be non-negative, got {self.alpha}")

    def observe(self, grad_norm: float) -> None:
        self.grad_norms.append(float(grad_norm))

    def epoch_grad_norm(self) -> Optional[float]:
        """Mean of the norms observed since the last adjustment, or None."""
        if not self.grad_norms:
            return None
        return float(np.mean(self.grad_norms))


@dataclass
class AnnealSchedule:
    """
    Predefined temperature decay from tau_max at e=0 to tau_min at e=E.

    Attributes:
        kind: linear, exponential or cosine
        tau_max: Starting temperature
        tau_min: Final temperature
        epochs: Total epochs E
    """
    kind: AnnealKind
    tau_max: float = TAU_MAX
    tau_min: float = TAU_MIN
    epochs: int = 50

    def __post_init__(self):
        try:
            self.kind = AnnealKind(self.kind)
        except ValueError:
            raise InvalidArgumentError(f"Unknown anneal schedule '{self.kind}'") from None
        if not 0 < self.tau_min <= self.tau_max:
            raise InvalidArgumentError(f"Need tau_max >= tau_min > 0, got {self.tau_max}, {self.tau_min}")
        if self.epochs < 1:
            raise InvalidArgumentError(f"Epochs must be positive, got {self.epochs}")


@dataclass(frozen=True)
class MomentPair:
    """Mean and variance of a scalar random variable."""
    mean: float
    var: float

    def __post_init__(self):
        if not self.var >= 0:
            raise InvalidArgumentError(f"Variance must be non-negative, got {self.var}")

    @property
    def std(self) -> float:
        return float(np.sqrt(self.var))


@dataclass
class MappingMatrices:
    """
    Dense selection matrices of one sample.

    Attributes:
        m_prime: One-hot rows [C_s, C] (row r selects channel S[r])
        m: m_prime scaled column-wise by the hard mask
    """
    m_prime: np.ndarray
    m: np.ndarray
