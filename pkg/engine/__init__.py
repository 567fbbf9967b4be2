"""
Hadaptive - Engine Module
Dense tensors, reverse-mode tape, differentiable ops and layers
"""

from .tensor import (
    Tensor,
    Tape,
    Parameter,
    DEFAULT_DTYPE,
    resolve_dtype,
    record,
    use,
    as_tensor,
)

# Differentiable ops
from .ops import (
    BN_EPS,
    BN_MOMENTUM,
    BatchNormState,
    elementwise,
    add,
    sub,
    mul,
    abs_,
    scale,
    relu,
    hardswish,
    sum_all,
    mean_all,
    reshape,
    concat,
    gather_channels,
    pointwise_conv,
    depthwise_conv,
    global_avg_pool,
    channel_conv1d,
    linear,
    batch_norm,
    softmax,
    cross_entropy,
)

# Layers and optimizer
from .layers import Module, BatchNorm, Linear, SGD, sgd_step, kaiming_normal

# Gradient checking
from .gradcheck import GradCheckResult, check_gradients, relative_error

# Exceptions
from .exceptions import (
    HadaptiveError,
    InvalidArgumentError,
    InvalidStateError,
    ConfigurationError,
    SpecParseError,
    NumericalError,
    DivergenceError,
    SchedulerError,
)

__all__ = [
    # Tensor
    'Tensor',
    'Tape',
    'Parameter',
    'DEFAULT_DTYPE',
    'resolve_dtype',
    'record',
    'use',
    'as_tensor',
    # Ops
    'BN_EPS',
    'BN_MOMENTUM',
    'BatchNormState',
    'elementwise',
    'add',
    'sub',
    'mul',
    'abs_',
    'scale',
    'relu',
    'hardswish',
    'sum_all',
    'mean_all',
    'reshape',
    'concat',
    'gather_channels',
    'pointwise_conv',
    'depthwise_conv',
    'global_avg_pool',
    'channel_conv1d',
    'linear',
    'batch_norm',
    'softmax',
    'cross_entropy',
    # Layers
    'Module',
    'BatchNorm',
    'Linear',
    'SGD',
    'sgd_step',
    'kaiming_normal',
    # Gradient checking
    'GradCheckResult',
    'check_gradients',
    'relative_error',
    # Exceptions
    'HadaptiveError',
    'InvalidArgumentError',
    'InvalidStateError',
    'ConfigurationError',
    'SpecParseError',
    'NumericalError',
    'DivergenceError',
    'SchedulerError',
]
