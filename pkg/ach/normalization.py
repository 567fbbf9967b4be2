"""
ACH - Bounded Normalization
Dynamic sigmoidal normalization y = f(alpha * x) * w + b with the softsign
curve and its two rivals, plus closed-form moment oracles for Hadamard
products and linear maps of normal variables.
"""

import logging
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from engine.exceptions import InvalidArgumentError
from engine.layers import Module
from engine.tensor import Parameter, Tape, Tensor, record, resolve_dtype, use

from .types import MomentPair, NormVariant

logger = logging.getLogger(__name__)


# ============================================================================
# Curves
# ============================================================================

def _below_one(dtype) -> np.floating:
    """Largest value of dtype strictly below 1."""
    one = np.ones((), dtype=dtype)
    return np.nextafter(one, np.zeros((), dtype=dtype))


def _float_dtype(u: np.ndarray):
    return u.dtype if np.issubdtype(u.dtype, np.floating) else np.dtype(np.float64)


def curve_value(variant: NormVariant, u: np.ndarray) -> np.ndarray:
    """
    f(u) in the dtype of u, computed in 64-bit.

    The result is clipped to the open range of the curve, so saturated
    inputs (|u| ~ 1e6 in 32-bit) never round onto the asymptote.
    """
    u = np.asarray(u)
    dt = _float_dtype(u)
    v = u.astype(np.float64)
    if variant is NormVariant.SOFTSIGN:
        f, lo = v / (1.0 + np.abs(v)), -1.0
    elif variant is NormVariant.SIGMOID:
        f, lo = expit(v), 0.0
    elif variant is NormVariant.ALGEBRAIC:
        # hypot does not overflow where v * v would
        f, lo = v / np.hypot(1.0, v), -1.0
    else:
        raise InvalidArgumentError(f"{variant.value} is not a sigmoidal curve")
    top = float(_below_one(dt))
    bottom = -top if lo < 0 else 0.0
    return np.clip(f, bottom, top).astype(dt)


def curve_slope(variant: NormVariant, u: np.ndarray) -> np.ndarray:
    """d f / d u. Softsign is differentiable at 0 with slope 1."""
    u = np.asarray(u)
    v = u.astype(np.float64)
    if variant is NormVariant.SOFTSIGN:
        slope = 1.0 / (1.0 + np.abs(v)) ** 2
    elif variant is NormVariant.SIGMOID:
        s = expit(v)
        slope = s * (1.0 - s)
    elif variant is NormVariant.ALGEBRAIC:
        slope = np.hypot(1.0, v) ** -3
    else:
        raise InvalidArgumentError(f"{variant.value} is not a sigmoidal curve")
    return slope.astype(_float_dtype(u))


def dynorm_forward(x: Tensor, alpha: Tensor, w: Tensor, b: Tensor,
                   variant: Union[NormVariant, str] = NormVariant.SOFTSIGN) -> Tensor:
    """
    Per-channel y = f(alpha * x) * w + b on [N, C] or [N, C, H, W].

    Args:
        x: Input
        alpha, w, b: Per-channel parameters [C]
        variant: softsign, sigmoid or algebraic

    Returns:
        Tensor shaped like x, recorded with gradients to x, alpha, w and b
    """
    variant = NormVariant.parse(variant)
    if not variant.is_curve:
        raise InvalidArgumentError("dynorm_forward needs a curve variant, not batchnorm")
    if x.ndim not in (2, 4):
        raise InvalidArgumentError(f"dynorm_forward: expected [N,C] or [N,C,H,W], got {x.shape}")
    c = x.shape[1]
    for name, p in (("alpha", alpha), ("w", w), ("b", b)):
        if p.shape != (c,):
            raise InvalidArgumentError(f"dynorm_forward: {name} has shape {p.shape}, expected ({c},)")

    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    bshape = (1, c) if x.ndim == 2 else (1, c, 1, 1)
    xv = x.data
    av, wv = alpha.data.reshape(bshape), w.data.reshape(bshape)
    u = av * xv
    f = curve_value(variant, u).astype(xv.dtype)
    out = f * wv + b.data.reshape(bshape)

    def vjp(g):
        # looked up at call time so a broken slope can be injected in tests
        slope = curve_slope(variant, u).astype(xv.dtype)
        gu = g * wv * slope
        return (
            gu * av,
            (gu * xv).sum(axis=axes),
            (g * f).sum(axis=axes),
            g.sum(axis=axes),
        )

    return record(f"dynorm_{variant.value}", out, (x, alpha, w, b), vjp)


class DyNorm(Module):
    """
    Learnable bounded normalization with per-channel alpha, w, b.

    Starts at alpha=1, w=1, b=0.
    """

    def __init__(self, channels: int, variant: Union[NormVariant, str] = NormVariant.SOFTSIGN,
                 dtype=None, name: str = "dynorm"):
        self.variant = NormVariant.parse(variant)
        if not self.variant.is_curve:
            raise InvalidArgumentError("DyNorm needs a curve variant; use BatchNorm for the batchnorm ablation")
        if channels < 1:
            raise InvalidArgumentError(f"DyNorm channels must be positive, got {channels}")
        dt = resolve_dtype(dtype)
        self.alpha = Parameter(np.ones(channels), name=f"{name}.alpha", dtype=dt)
        self.w = Parameter(np.ones(channels), name=f"{name}.w", dtype=dt)
        self.b = Parameter(np.zeros(channels), name=f"{name}.b", dtype=dt)

    def forward(self, x: Tensor, tape: Optional[Tape] = None, training: bool = True) -> Tensor:
        return dynorm_forward(x, use(self.alpha, tape), use(self.w, tape), use(self.b, tape), self.variant)


# ============================================================================
# Moment oracles (independent normal model)
# ============================================================================

def cross_hadamard_moments(a: MomentPair, b: MomentPair) -> MomentPair:
    """Moments of the product of two independent normals."""
    return MomentPair(
        mean=a.mean * b.mean,
        var=a.mean ** 2 * b.var + b.mean ** 2 * a.var + a.var * b.var,
    )


def self_hadamard_moments(z: MomentPair) -> MomentPair:
    """Moments of Z^2 for Z ~ N(mu, sigma^2)."""
    mu2, s2 = z.mean ** 2, z.var
    return MomentPair(mean=mu2 + s2, var=2.0 * s2 * (2.0 * mu2 + s2))


def linear_map_moments(z: MomentPair, frobenius_sq_over_m: float, mean_weight_sum: float,
                       bias_mean: float = 0.0) -> MomentPair:
    """
    Channel-averaged moments of A z + b for i.i.d. entries of z.

    Args:
        z: Moments of each input entry
        frobenius_sq_over_m: ||A||_F^2 / m
        mean_weight_sum: (sum of all entries of A) / m
        bias_mean: E[b]
    """
    if frobenius_sq_over_m < 0:
        raise InvalidArgumentError(f"Frobenius term must be non-negative, got {frobenius_sq_over_m}")
    return MomentPair(mean=z.mean * mean_weight_sum + bias_mean, var=z.var * frobenius_sq_over_m)


def map_statistics(matrix: np.ndarray) -> Tuple[float, float]:
    """(||A||_F^2 / m, sum(A) / m) for an [m, m_in] map with m output rows."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1:
        raise InvalidArgumentError(f"Map must be a non-empty matrix, got shape {a.shape}")
    m = a.shape[0]
    return float((a * a).sum() / m), float(a.sum() / m)
