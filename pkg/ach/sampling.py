"""
ACH - Differentiable Channel Sampling
Gumbel perturbation, tempered softmax, hard top-k with a straight-through
gradient, and temperature control (adaptive and scheduled).
"""

import logging
import math
import zlib
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from engine.exceptions import InvalidArgumentError
from engine.ops import add, scale, softmax
from engine.tensor import Tensor, record

from .types import AnnealKind, AnnealSchedule, SelectionState

logger = logging.getLogger(__name__)

UNIFORM_EPS = 1e-12

ArrayLike = Union[Tensor, np.ndarray]


def _values(x: ArrayLike) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


# ============================================================================
# Gumbel noise
# ============================================================================

def gumbel_noise(u):
    """
    Gumbel transform -log(-log(u)).

    Args:
        u: Scalar or array of uniform samples strictly inside (0, 1)

    Raises:
        InvalidArgumentError: Any u outside the open interval
    """
    arr = np.asarray(u, dtype=np.float64)
    if arr.size and not (np.all(arr > 0.0) and np.all(arr < 1.0)):
        raise InvalidArgumentError("Gumbel input u must lie strictly inside (0, 1)")
    out = -np.log(-np.log(arr))
    return float(out) if out.ndim == 0 else out


def module_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator per (seed, module name)."""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))


def sample_gumbel(rng: np.random.Generator, shape: Tuple[int, ...], dtype=np.float64,
                  eps: float = UNIFORM_EPS) -> np.ndarray:
    """Gumbel(0, 1) draws with u from (eps, 1 - eps)."""
    u = rng.uniform(eps, 1.0 - eps, size=shape)
    return np.asarray(gumbel_noise(u), dtype=dtype)


# ============================================================================
# Soft probabilities and hard top-k
# ============================================================================

def soft_probs(xi: Tensor, noise: Optional[ArrayLike], tau: float) -> Tensor:
    """softmax((xi + noise) / tau) over the last axis; noise may be None."""
    if not tau > 0:
        raise InvalidArgumentError(f"Temperature must be positive, got {tau}")
    logits = xi
    if noise is not None:
        logits = add(xi, Tensor(_values(noise), xi.dtype))
    return softmax(scale(logits, 1.0 / tau), axis=-1)


def _check_k(k: int, c: int) -> None:
    if not 1 <= k <= c:
        raise InvalidArgumentError(f"k must be in [1, {c}], got {k}")


def topk_indices(values: np.ndarray, k: int) -> np.ndarray:
    """
    Positions of the k largest entries along the last axis, ascending.

    Ties go to the lower index.
    """
    values = np.asarray(values)
    _check_k(k, values.shape[-1])
    order = np.argsort(-values, axis=-1, kind="stable")[..., :k]
    return np.sort(order, axis=-1)


def _mask_from(indices: np.ndarray, shape: Tuple[int, ...], dtype) -> np.ndarray:
    mask = np.zeros(shape, dtype=dtype)
    np.put_along_axis(mask, indices, 1.0, axis=-1)
    return mask


@dataclass
class SteAnchor:
    """
    Frozen selection around which the straight-through estimator is linear.

    The hard forward is piecewise constant, so finite differences cannot see
    the estimator. Anchored, the forward becomes hard + (probs - probs_at)
    which equals the hard mask at the anchor and has the identity derivative.
    """
    indices: np.ndarray
    hard: np.ndarray
    probs: np.ndarray

    @classmethod
    def capture(cls, probs: ArrayLike, k: int) -> "SteAnchor":
        p = np.array(_values(probs))
        idx = topk_indices(p, k)
        return cls(indices=idx, hard=_mask_from(idx, p.shape, p.dtype), probs=p)


def hard_topk_ste(probs: Tensor, k: int, anchor: Optional[SteAnchor] = None) -> Tuple[Tensor, np.ndarray]:
    """
    Exact 0/1 top-k mask forward, identity gradient back to probs.

    Args:
        probs: Soft distribution [..., C]
        k: Number of ones per row
        anchor: Optional frozen selection (see SteAnchor)

    Returns:
        (hard mask tensor, ascending indices [..., k])
    """
    _check_k(k, probs.shape[-1])
    if anchor is None:
        idx = topk_indices(probs.data, k)
        hard = _mask_from(idx, probs.shape, probs.dtype)
    else:
        if anchor.probs.shape != probs.shape:
            raise InvalidArgumentError(f"Anchor shape {anchor.probs.shape} does not match {probs.shape}")
        idx = anchor.indices
        hard = (anchor.hard + (probs.data - anchor.probs)).astype(probs.dtype)
    return record("hard_topk_ste", hard, (probs,), lambda g: (g,)), idx


def inference_select(xi: ArrayLike, k: int) -> np.ndarray:
    """Deterministic top-k of raw scores (no noise, no softmax)."""
    return topk_indices(_values(xi), k)


# ============================================================================
# Temperature control
# ============================================================================

def adjust_tau(state: SelectionState, grad_norm: float) -> SelectionState:
    """
    Nudge tau by a factor (1 +/- alpha) following the gradient-norm trend.

    The first call (tau_hist == 0) only records the norm. A norm at or
    above the previous one raises tau; a smaller one lowers it. tau is
    clamped to [tau_min, tau_max].
    """
    if not grad_norm >= 0:
        raise InvalidArgumentError(f"Gradient norm must be non-negative, got {grad_norm}")
    if state.tau_hist != 0:
        delta = 1.0 if grad_norm >= state.tau_hist else -1.0
        state.tau = min(max(state.tau * (1.0 + state.alpha * delta), state.tau_min), state.tau_max)
    state.tau_hist = float(grad_norm)
    return state


def adjust_tau_for_epoch(state: SelectionState) -> SelectionState:
    """Apply adjust_tau with the mean norm observed this epoch, then reset."""
    norm = state.epoch_grad_norm()
    if norm is not None:
        adjust_tau(state, norm)
        state.grad_norms.clear()
    return state


def anneal_tau(e: int, sched: AnnealSchedule) -> float:
    """
    Scheduled temperature at epoch e in [0, E].

    Raises:
        InvalidArgumentError: e outside [0, E]
    """
    if not 0 <= e <= sched.epochs:
        raise InvalidArgumentError(f"Epoch must be in [0, {sched.epochs}], got {e}")
    hi, lo = sched.tau_max, sched.tau_min
    if e == 0:
        return hi
    if e == sched.epochs:
        return lo
    t = e / sched.epochs
    if sched.kind is AnnealKind.LINEAR:
        tau = hi - (hi - lo) * t
    elif sched.kind is AnnealKind.EXPONENTIAL:
        tau = hi * (lo / hi) ** t
    else:
        tau = lo + 0.5 * (hi - lo) * (1.0 + math.cos(math.pi * t))
    return min(max(tau, lo), hi)
