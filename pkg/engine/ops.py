"""
Engine - Differentiable Operations
Forward kernels with their vector-Jacobian products, recorded on the tape.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax as _softmax

from .exceptions import InvalidArgumentError
from .tensor import Tensor, record

BN_EPS = 1e-5
BN_MOMENTUM = 0.1

ELEMENTWISE_KINDS = ("add", "sub", "mul", "abs", "scale")


def _same_shape(a: Tensor, b: Tensor, name: str) -> None:
    if a.shape != b.shape:
        raise InvalidArgumentError(f"{name}: shape mismatch {a.shape} vs {b.shape}")


def _require_ndim(x: Tensor, ndim: int, name: str) -> None:
    if x.ndim != ndim:
        raise InvalidArgumentError(f"{name}: expected {ndim}-d input, got shape {x.shape}")


def _odd_kernel(k: int, name: str) -> None:
    if k < 1 or k % 2 == 0:
        raise InvalidArgumentError(f"{name}: kernel width must be odd, got {k}")


# ============================================================================
# Elementwise
# ============================================================================

def elementwise(op_kind: str, a: Tensor, b: Optional[Tensor] = None, factor: float = 1.0) -> Tensor:
    """
    Elementwise op on equal-shaped tensors.

    Args:
        op_kind: One of "add", "sub", "mul" (binary), "abs", "scale" (unary)
        a: First operand
        b: Second operand for binary kinds
        factor: Multiplier for "scale"

    Raises:
        InvalidArgumentError: Unknown kind or shape mismatch
    """
    if op_kind not in ELEMENTWISE_KINDS:
        raise InvalidArgumentError(f"Unknown elementwise op: {op_kind}")

    if op_kind in ("add", "sub", "mul"):
        if b is None:
            raise InvalidArgumentError(f"{op_kind} needs two operands")
        _same_shape(a, b, op_kind)
        x, y = a.data, b.data
        if op_kind == "add":
            return record("add", x + y, (a, b), lambda g: (g, g))
        if op_kind == "sub":
            return record("sub", x - y, (a, b), lambda g: (g, -g))
        # product rule: each parent receives the other operand
        return record("mul", x * y, (a, b), lambda g: (g * y, g * x))

    x = a.data
    if op_kind == "abs":
        # subgradient 0 at the origin
        return record("abs", np.abs(x), (a,), lambda g: (g * np.sign(x),))
    f = x.dtype.type(factor)
    return record("scale", x * f, (a,), lambda g: (g * f,))


def add(a: Tensor, b: Tensor) -> Tensor:
    return elementwise("add", a, b)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return elementwise("sub", a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return elementwise("mul", a, b)


def abs_(a: Tensor) -> Tensor:
    return elementwise("abs", a)


def scale(a: Tensor, factor: float) -> Tensor:
    return elementwise("scale", a, factor=factor)


def relu(x: Tensor) -> Tensor:
    v = x.data
    mask = (v > 0).astype(v.dtype)
    return record("relu", v * mask, (x,), lambda g: (g * mask,))


def hardswish(x: Tensor) -> Tensor:
    """x * relu6(x + 3) / 6"""
    v = x.data
    out = v * np.clip(v + 3.0, 0.0, 6.0) / 6.0
    slope = np.where(v < -3.0, 0.0, np.where(v > 3.0, 1.0, (2.0 * v + 3.0) / 6.0)).astype(v.dtype)
    return record("hardswish", out.astype(v.dtype), (x,), lambda g: (g * slope,))


# ============================================================================
# Reductions and reshapes
# ============================================================================

def sum_all(x: Tensor) -> Tensor:
    shape = x.shape
    return record("sum", np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean_all(x: Tensor) -> Tensor:
    if x.size == 0:
        raise InvalidArgumentError("mean of an empty tensor")
    shape, n = x.shape, x.size
    return record(
        "mean", np.asarray(x.data.mean()), (x,),
        lambda g: (np.broadcast_to(g / n, shape).astype(x.dtype),),
    )


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    original = x.shape
    return record("reshape", x.data.reshape(tuple(shape)), (x,), lambda g: (g.reshape(original),))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    """Concatenate along an axis (channel axis by default)."""
    if not tensors:
        raise InvalidArgumentError("concat needs at least one tensor")
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    return record("concat", out, tuple(tensors), lambda g: tuple(np.split(g, splits, axis=axis)))


def gather_channels(x: Tensor, indices: Sequence[int]) -> Tensor:
    """x[:, indices] with scatter-add backward (indices may repeat)."""
    idx = np.asarray(indices, dtype=np.intp)
    c = x.shape[1]
    if idx.size and (idx.min() < 0 or idx.max() >= c):
        raise InvalidArgumentError(f"gather_channels: indices out of range for {c} channels")

    def vjp(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        np.add.at(gx, (slice(None), idx), g)
        return (gx,)

    return record("gather_channels", x.data[:, idx], (x,), vjp)


# ============================================================================
# Convolutions and pooling
# ============================================================================

def pointwise_conv(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    """
    1x1 convolution: out[n,o,h,w] = sum_c w[o,c] * x[n,c,h,w] + b[o].

    Args:
        x: Input [N, C_in, H, W]
        w: Weights [C_out, C_in]
        b: Optional bias [C_out]
    """
    _require_ndim(x, 4, "pointwise_conv")
    if w.ndim != 2 or w.shape[1] != x.shape[1]:
        raise InvalidArgumentError(
            f"pointwise_conv: weight {w.shape} does not match {x.shape[1]} input channels"
        )
    xv, wv = x.data, w.data
    out = np.einsum("oc,nchw->nohw", wv, xv)
    parents = [x, w]
    if b is not None:
        if b.shape != (w.shape[0],):
            raise InvalidArgumentError(f"pointwise_conv: bias {b.shape} does not match {w.shape[0]} outputs")
        out = out + b.data[None, :, None, None]
        parents.append(b)

    def vjp(g):
        grads = [np.einsum("oc,nohw->nchw", wv, g), np.einsum("nohw,nchw->oc", g, xv)]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return record("pointwise_conv", out, parents, vjp)


def depthwise_conv(x: Tensor, w: Tensor, stride: int = 1) -> Tensor:
    """
    Per-channel k x k convolution with zero padding k//2.

    Output spatial extent is ceil(H / stride).

    Args:
        x: Input [N, C, H, W]
        w: Kernels [C, k, k], k odd
        stride: 1 or 2
    """
    _require_ndim(x, 4, "depthwise_conv")
    if w.ndim != 3 or w.shape[0] != x.shape[1] or w.shape[1] != w.shape[2]:
        raise InvalidArgumentError(f"depthwise_conv: kernel {w.shape} does not match input {x.shape}")
    k = w.shape[1]
    _odd_kernel(k, "depthwise_conv")
    if stride not in (1, 2):
        raise InvalidArgumentError(f"depthwise_conv: stride must be 1 or 2, got {stride}")

    n, c, h, wd = x.shape
    p = k // 2
    ho, wo = -(-h // stride), -(-wd // stride)
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p)))
    wv = w.data
    hs, ws = stride * (ho - 1) + 1, stride * (wo - 1) + 1

    out = np.zeros((n, c, ho, wo), dtype=x.dtype)
    for di in range(k):
        for dj in range(k):
            out += wv[None, :, di, dj, None, None] * xp[:, :, di:di + hs:stride, dj:dj + ws:stride]

    def vjp(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(wv)
        for di in range(k):
            for dj in range(k):
                window = xp[:, :, di:di + hs:stride, dj:dj + ws:stride]
                gxp[:, :, di:di + hs:stride, dj:dj + ws:stride] += wv[None, :, di, dj, None, None] * g
                gw[:, di, dj] = (g * window).sum(axis=(0, 2, 3))
        return gxp[:, :, p:p + h, p:p + wd], gw

    return record("depthwise_conv", out, (x, w), vjp)


def global_avg_pool(x: Tensor) -> Tensor:
    """Mean over (H, W): [N, C, H, W] -> [N, C]."""
    _require_ndim(x, 4, "global_avg_pool")
    n, c, h, w = x.shape
    if h < 1 or w < 1:
        raise InvalidArgumentError(f"global_avg_pool: empty spatial extent {x.shape}")
    area = h * w

    def vjp(g):
        return (np.broadcast_to((g / area)[:, :, None, None], x.shape).astype(x.dtype),)

    return record("global_avg_pool", x.data.mean(axis=(2, 3)), (x,), vjp)


def channel_conv1d(v: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """
    1D convolution across the channel axis with zero padding k//2.

    out[n,c] = sum_j w[j] * v[n, c + j - k//2] + b (out-of-range reads are 0)

    Args:
        v: Channel descriptors [N, C]
        w: Kernel [k], k odd
        b: Scalar bias, shape () or (1,)
    """
    _require_ndim(v, 2, "channel_conv1d")
    if w.ndim != 1:
        raise InvalidArgumentError(f"channel_conv1d: kernel must be 1-d, got {w.shape}")
    k = w.shape[0]
    _odd_kernel(k, "channel_conv1d")
    if b.size != 1:
        raise InvalidArgumentError(f"channel_conv1d: bias must be scalar, got {b.shape}")

    n, c = v.shape
    p = k // 2
    vp = np.pad(v.data, ((0, 0), (p, p)))
    wv = w.data
    out = np.zeros((n, c), dtype=v.dtype)
    for j in range(k):
        out += wv[j] * vp[:, j:j + c]
    out += b.data.reshape(())

    def vjp(g):
        gvp = np.zeros_like(vp)
        gw = np.zeros_like(wv)
        for j in range(k):
            gvp[:, j:j + c] += wv[j] * g
            gw[j] = (g * vp[:, j:j + c]).sum()
        return gvp[:, p:p + c], gw, np.asarray(g.sum(), dtype=g.dtype).reshape(b.shape)

    return record("channel_conv1d", out, (v, w, b), vjp)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w.T + b for x [N, F], w [O, F], b [O]."""
    _require_ndim(x, 2, "linear")
    if w.shape[1] != x.shape[1] or b.shape != (w.shape[0],):
        raise InvalidArgumentError(f"linear: weight {w.shape} / bias {b.shape} do not match input {x.shape}")
    xv, wv = x.data, w.data
    return record(
        "linear", xv @ wv.T + b.data, (x, w, b),
        lambda g: (g @ wv, g.T @ xv, g.sum(axis=0)),
    )


# ============================================================================
# Batch normalization
# ============================================================================

@dataclass
class BatchNormState:
    """
    Running statistics of one batch-norm layer.

    Running variance is the biased (population) batch variance, so a
    momentum-1 update makes eval mode reproduce the last train batch.
    """
    channels: int
    momentum: float = BN_MOMENTUM
    eps: float = BN_EPS
    running_mean: Optional[np.ndarray] = None
    running_var: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.channels < 1:
            raise InvalidArgumentError(f"BatchNorm channels must be positive, got {self.channels}")
        if not 0.0 <= self.momentum <= 1.0:
            raise InvalidArgumentError(f"BatchNorm momentum must be 0-1, got {self.momentum}")
        if self.eps <= 0:
            raise InvalidArgumentError(f"BatchNorm eps must be positive, got {self.eps}")

    def ensure(self, dtype) -> None:
        if self.running_mean is None or self.running_mean.dtype != dtype:
            mean = np.zeros(self.channels) if self.running_mean is None else self.running_mean
            var = np.ones(self.channels) if self.running_var is None else self.running_var
            self.running_mean = np.asarray(mean, dtype=dtype)
            self.running_var = np.asarray(var, dtype=dtype)


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, state: BatchNormState, training: bool) -> Tensor:
    """
    Per-channel standardization with affine gamma/beta.

    Works on [N, C] and [N, C, H, W]. Train mode normalizes with batch
    statistics and updates the running ones; eval mode uses the running
    statistics.

    Raises:
        InvalidArgumentError: Fewer than two values per channel in train mode
    """
    if x.ndim not in (2, 4):
        raise InvalidArgumentError(f"batch_norm: expected [N,C] or [N,C,H,W], got {x.shape}")
    c = x.shape[1]
    if c != state.channels or gamma.shape != (c,) or beta.shape != (c,):
        raise InvalidArgumentError(f"batch_norm: {c} channels vs state/affine of {state.channels}")

    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    bshape = (1, c) if x.ndim == 2 else (1, c, 1, 1)
    count = x.size // c
    xv = x.data
    state.ensure(xv.dtype)

    if training:
        if count < 2:
            raise InvalidArgumentError("batch_norm: train mode needs at least 2 values per channel")
        mean = xv.mean(axis=axes)
        var = xv.var(axis=axes)
        m = state.momentum
        state.running_mean = ((1.0 - m) * state.running_mean + m * mean).astype(xv.dtype)
        state.running_var = ((1.0 - m) * state.running_var + m * var).astype(xv.dtype)
    else:
        mean, var = state.running_mean, state.running_var

    inv_std = (1.0 / np.sqrt(var + state.eps)).astype(xv.dtype)
    xhat = (xv - mean.reshape(bshape)) * inv_std.reshape(bshape)
    gv = gamma.data.reshape(bshape)
    out = gv * xhat + beta.data.reshape(bshape)

    def vjp(g):
        g_gamma = (g * xhat).sum(axis=axes)
        g_beta = g.sum(axis=axes)
        gxhat = g * gv
        if training:
            s1 = gxhat.sum(axis=axes).reshape(bshape)
            s2 = (gxhat * xhat).sum(axis=axes).reshape(bshape)
            gx = inv_std.reshape(bshape) * (gxhat - s1 / count - xhat * s2 / count)
        else:
            gx = gxhat * inv_std.reshape(bshape)
        return gx, g_gamma, g_beta

    return record("batch_norm", out, (x, gamma, beta), vjp)


# ============================================================================
# Softmax and loss
# ============================================================================

def softmax(v: Tensor, axis: int = -1) -> Tensor:
    """Max-stabilized softmax along an axis."""
    s = _softmax(v.data, axis=axis).astype(v.dtype)

    def vjp(g):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return record("softmax", s, (v,), vjp)


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """
    Mean negative log-likelihood of integer labels.

    Args:
        logits: [N, K]
        labels: N class ids in [0, K)

    Raises:
        InvalidArgumentError: Empty batch or label out of range
    """
    _require_ndim(logits, 2, "cross_entropy")
    y = np.asarray(labels, dtype=np.intp)
    n, k = logits.shape
    if n == 0:
        raise InvalidArgumentError("cross_entropy: empty batch")
    if y.shape != (n,):
        raise InvalidArgumentError(f"cross_entropy: {y.shape[0]} labels for {n} rows")
    if y.min() < 0 or y.max() >= k:
        raise InvalidArgumentError(f"cross_entropy: labels must be in [0, {k})")

    z = logits.data
    logp = z - logsumexp(z, axis=1, keepdims=True)
    rows = np.arange(n)
    loss = np.asarray(-logp[rows, y].mean(), dtype=z.dtype)

    def vjp(g):
        grad = np.exp(logp)
        grad[rows, y] -= 1.0
        return ((grad * (g / n)).astype(z.dtype),)

    return record("cross_entropy", loss, (logits,), vjp)
