"""
Engine - Layers and Optimizer
Parameter containers over the ops, plus SGD with momentum.
"""

import logging
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from .exceptions import InvalidArgumentError
from .ops import BN_EPS, BN_MOMENTUM, BatchNormState, batch_norm, linear
from .tensor import Parameter, Tape, Tensor, resolve_dtype, use

logger = logging.getLogger(__name__)


def kaiming_normal(rng: np.random.Generator, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
    """N(0, 2 / fan_in) initial weights."""
    if fan_in < 1:
        raise InvalidArgumentError(f"fan_in must be positive, got {fan_in}")
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


class Module:
    """
    Base class for anything that owns Parameters.

    Parameters and sub-modules are discovered from instance attributes
    (including lists of modules), in attribute definition order.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Parameter):
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        """This module and every sub-module, depth first."""
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.astype(dtype)
        return self

    def num_parameters(self) -> int:
        return int(sum(p.value.size for p in self.parameters()))


class BatchNorm(Module):
    """Batch normalization with learnable gamma/beta and running statistics."""

    def __init__(self, channels: int, eps: float = BN_EPS, momentum: float = BN_MOMENTUM,
                 dtype=None, name: str = "bn"):
        dt = resolve_dtype(dtype)
        self.gamma = Parameter(np.ones(channels), name=f"{name}.gamma", dtype=dt)
        self.beta = Parameter(np.zeros(channels), name=f"{name}.beta", dtype=dt)
        self.state = BatchNormState(channels=channels, momentum=momentum, eps=eps)

    def forward(self, x: Tensor, tape: Optional[Tape] = None, training: bool = True) -> Tensor:
        return batch_norm(x, use(self.gamma, tape), use(self.beta, tape), self.state, training)


class Linear(Module):
    """Fully connected layer, uniform(-1/sqrt(F), 1/sqrt(F)) init."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator,
                 dtype=None, name: str = "linear"):
        if in_features < 1 or out_features < 1:
            raise InvalidArgumentError(f"Linear dims must be positive: {in_features}->{out_features}")
        dt = resolve_dtype(dtype)
        bound = 1.0 / np.sqrt(in_features)
        self.weight = Parameter(rng.uniform(-bound, bound, (out_features, in_features)),
                                name=f"{name}.weight", dtype=dt)
        self.bias = Parameter(np.zeros(out_features), name=f"{name}.bias", dtype=dt)

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return linear(x, use(self.weight, tape), use(self.bias, tape))


class SGD:
    """
    Stochastic gradient descent with classical momentum.

    v <- momentum * v + grad;  p <- p - lr * v
    """

    def __init__(self, params: List[Parameter], lr: float = 0.05, momentum: float = 0.9):
        if lr <= 0:
            raise InvalidArgumentError(f"Learning rate must be positive, got {lr}")
        if not 0.0 <= momentum < 1.0:
            raise InvalidArgumentError(f"Momentum must be in [0, 1), got {momentum}")
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self._velocity: Dict[int, np.ndarray] = {}

    def step(self) -> None:
        for p in self.params:
            v = self._velocity.get(id(p))
            v = p.grad.copy() if v is None else self.momentum * v + p.grad
            self._velocity[id(p)] = v
            p.assign(p.value.data - self.lr * v)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


def sgd_step(params: List[Parameter], lr: float, momentum: float = 0.0,
             velocity: Optional[Dict[int, np.ndarray]] = None) -> Dict[int, np.ndarray]:
    """Functional single SGD step; returns the updated velocity buffers."""
    opt = SGD(params, lr=lr, momentum=momentum)
    if velocity:
        opt._velocity = dict(velocity)
    opt.step()
    return opt._velocity
