"""
ACH - Adaptive Cross-Hadamard Layer
Optional pointwise conv and batch norm, ECA channel scoring, differentiable top-k
selection, pairwise Hadamard products, bounded normalization, concat.
"""

import logging
from typing import List, Optional, Sequence, Union

import numpy as np

from engine.exceptions import InvalidArgumentError
from engine.layers import BatchNorm, Module, kaiming_normal
from engine.ops import (
    channel_conv1d,
    concat,
    gather_channels,
    global_avg_pool,
    mul,
    pointwise_conv,
    reshape,
)
from engine.tensor import Parameter, Tape, Tensor, record, resolve_dtype, use
from kernels.pairing import pair_table

from .normalization import DyNorm
from .sampling import (
    SteAnchor,
    hard_topk_ste,
    inference_select,
    module_stream,
    sample_gumbel,
    soft_probs,
)
from .types import AchConfig, MappingMatrices, NormVariant, SelectionMode, SelectionState

logger = logging.getLogger(__name__)


# ============================================================================
# Scoring
# ============================================================================

def eca_scores(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Raw channel scores: global average pool, then a 1D conv across channels."""
    return channel_conv1d(global_avg_pool(x), weight, bias)


class EcaScorer(Module):
    """ECA scoring head. The kernel starts as a centered delta."""

    def __init__(self, kernel: int = 3, dtype=None, name: str = "eca"):
        if kernel < 1 or kernel % 2 == 0:
            raise InvalidArgumentError(f"ECA kernel must be odd, got {kernel}")
        dt = resolve_dtype(dtype)
        delta = np.zeros(kernel)
        delta[kernel // 2] = 1.0
        self.weight = Parameter(delta, name=f"{name}.weight", dtype=dt)
        self.bias = Parameter(np.zeros(1), name=f"{name}.bias", dtype=dt)

    def forward(self, x: Tensor, tape: Optional[Tape] = None) -> Tensor:
        return eca_scores(x, use(self.weight, tape), use(self.bias, tape))


def tile_rows(v: Tensor, n: int) -> Tensor:
    """[C] -> [n, C] by repeating the row; gradients sum over the copies."""
    row = reshape(v, (1, v.shape[0]))
    return concat([row] * n, axis=0)


# ============================================================================
# Selection and expansion
# ============================================================================

def _selected_index(indices: np.ndarray, shape) -> np.ndarray:
    n, k = indices.shape
    return np.broadcast_to(indices[:, :, None, None], (n, k) + tuple(shape[2:]))


def select_channels(x: Tensor, hard: Tensor, indices: np.ndarray) -> Tensor:
    """
    Z[n, r] = hard[n, S[n, r]] * x[n, S[n, r]].

    This is the product of the masked mapping matrix with X, done as a
    gather. The hard mask stays on the graph, so gradients reach both x and
    the selection.

    Args:
        x: Features [N, C, H, W]
        hard: Mask [N, C] (ones at the selected positions)
        indices: Selected channel ids [N, k]
    """
    idx = np.asarray(indices, dtype=np.intp)
    if x.ndim != 4 or hard.shape != x.shape[:2]:
        raise InvalidArgumentError(f"select_channels: mask {hard.shape} does not match features {x.shape}")
    if idx.ndim != 2 or idx.shape[0] != x.shape[0]:
        raise InvalidArgumentError(f"select_channels: indices {idx.shape} do not match batch {x.shape[0]}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[1]):
        raise InvalidArgumentError("select_channels: index out of range")

    xv, hv = x.data, hard.data
    idx4 = _selected_index(idx, x.shape)
    xs = np.take_along_axis(xv, idx4, axis=1)
    hs = np.take_along_axis(hv, idx, axis=1)
    out = xs * hs[:, :, None, None]

    def vjp(g):
        gx = np.zeros(x.shape, dtype=g.dtype)
        np.put_along_axis(gx, idx4, g * hs[:, :, None, None], axis=1)
        gh = np.zeros(hard.shape, dtype=g.dtype)
        np.put_along_axis(gh, idx, (g * xs).sum(axis=(2, 3)), axis=1)
        return gx, gh

    return record("select_channels", out, (x, hard), vjp)


def mapping_matrices(indices: Sequence[int], hard: np.ndarray) -> MappingMatrices:
    """Dense one-hot rows for one sample and their mask-scaled version."""
    idx = np.asarray(indices, dtype=np.intp)
    h = np.asarray(hard)
    m_prime = np.zeros((idx.size, h.shape[-1]), dtype=h.dtype)
    m_prime[np.arange(idx.size), idx] = 1.0
    return MappingMatrices(m_prime=m_prime, m=m_prime * h[None, :])


def dense_select(x: np.ndarray, mats: Sequence[MappingMatrices]) -> np.ndarray:
    """Reference Z = M X per sample with materialized matrices."""
    return np.stack([np.einsum("kc,chw->khw", m.m, x[n]) for n, m in enumerate(mats)])


def cross_hadamard_expand(z: Tensor) -> Tensor:
    """
    All pairwise products z[:, i] * z[:, j], i < j, in pair-index order.

    Raises:
        InvalidArgumentError: Fewer than 2 channels
    """
    if z.ndim != 4:
        raise InvalidArgumentError(f"cross_hadamard_expand expects [N, C, H, W], got {z.shape}")
    cs = z.shape[1]
    if cs < 2:
        raise InvalidArgumentError(f"cross_hadamard_expand needs at least 2 channels, got {cs}")
    table = pair_table(cs)
    return mul(gather_channels(z, table[:, 0]), gather_channels(z, table[:, 1]))


# ============================================================================
# Layer
# ============================================================================

class ACHLayer(Module):
    """
    Adaptive Cross-Hadamard layer: C -> C + C_s(C_s - 1)/2 channels.

    Training forward samples a per-sample top-k with Gumbel noise and a
    straight-through gradient; eval forward takes the top-k of the raw
    scores off any tape.
    """

    def __init__(
        self,
        cfg: AchConfig,
        rng: Optional[np.random.Generator] = None,
        seed: int = 0,
        dtype=None,
        name: str = "ach",
        init: str = "random",
        tau: float = 1.0,
        alpha: float = 0.01,
        uniform_eps: float = 1e-12,
    ):
        self.cfg = cfg
        self.name = name
        dt = resolve_dtype(dtype)
        rng = rng if rng is not None else np.random.default_rng(seed)
        c, p = cfg.c_in, cfg.num_products

        if init not in ("identity", "random"):
            raise InvalidArgumentError(f"Unknown init '{init}'. Use random or identity")
        self.weight: Optional[Parameter] = None
        if cfg.pointwise:
            w = np.eye(c) if init == "identity" else kaiming_normal(rng, (c, c), c)
            self.weight = Parameter(w, name=f"{name}.pw", dtype=dt)
        self.bn = BatchNorm(c, dtype=dt, name=f"{name}.bn")

        self.eca: Optional[EcaScorer] = None
        self.logits: Optional[Parameter] = None
        self.fixed_indices: Optional[np.ndarray] = None
        if cfg.selection is SelectionMode.ECA:
            self.eca = EcaScorer(cfg.eca_kernel, dtype=dt, name=f"{name}.eca")
        elif cfg.selection is SelectionMode.FREE:
            self.logits = Parameter(0.01 * rng.standard_normal(c), name=f"{name}.logits", dtype=dt)
        else:
            self.fixed_indices = np.sort(rng.choice(c, size=cfg.c_sel, replace=False))

        if cfg.norm_variant is NormVariant.BATCHNORM:
            self.norm: Module = BatchNorm(p, dtype=dt, name=f"{name}.norm")
        else:
            self.norm = DyNorm(p, cfg.norm_variant, dtype=dt, name=f"{name}.norm")

        self.state = SelectionState(k=cfg.c_sel, tau=tau, alpha=alpha)
        self.noise_rng = module_stream(seed, name)
        self.uniform_eps = uniform_eps
        self.last_scores: Optional[Tensor] = None

    @property
    def out_channels(self) -> int:
        return self.cfg.out_channels

    def scores(self, h: Tensor, tape: Optional[Tape]) -> Optional[Tensor]:
        if self.eca is not None:
            return self.eca.forward(h, tape)
        if self.logits is not None:
            return tile_rows(use(self.logits, tape), h.shape[0])
        return None

    def forward(
        self,
        x: Tensor,
        tape: Optional[Tape] = None,
        training: bool = True,
        noise: Optional[np.ndarray] = None,
        anchor: Optional[SteAnchor] = None,
    ) -> Tensor:
        """
        Args:
            x: Input [N, C, H, W]
            tape: Tape to record on (ignored in eval mode)
            training: Gumbel top-k with STE if True, raw top-k if False
            noise: Explicit Gumbel noise [N, C]; drawn from the layer stream when None
            anchor: Frozen selection for finite-difference checks

        Returns:
            [N, C + C_s(C_s-1)/2, H, W], originals first
        """
        if x.ndim != 4 or x.shape[1] != self.cfg.c_in:
            raise InvalidArgumentError(f"{self.name}: expected [N, {self.cfg.c_in}, H, W], got {x.shape}")
        if not training:
            tape = None
            x = x.detach()

        h = pointwise_conv(x, use(self.weight, tape)) if self.weight is not None else x
        h = self.bn.forward(h, tape, training)
        n, k = x.shape[0], self.cfg.c_sel

        xi = self.scores(h, tape)
        probs = None
        if xi is None:
            idx = np.tile(self.fixed_indices, (n, 1))
            hard = Tensor(np.ones((n, self.cfg.c_in)), h.dtype)
        elif training:
            if noise is None and self.cfg.noise_enabled:
                noise = sample_gumbel(self.noise_rng, xi.shape, xi.dtype, self.uniform_eps)
            probs = soft_probs(xi, noise, self.state.tau)
            hard, idx = hard_topk_ste(probs, k, anchor)
        else:
            idx = inference_select(xi, k)
            hard = Tensor(np.ones((n, self.cfg.c_in)), h.dtype)

        z = select_channels(h, hard, idx)
        products = self.norm.forward(cross_hadamard_expand(z), tape, training)

        self.last_scores = xi
        self.state.xi = xi.detach() if xi is not None else None
        self.state.probs = probs.detach() if probs is not None else None
        self.state.hard = hard.detach()
        self.state.indices = np.array(idx)
        return concat([h, products], axis=1)

    def capture_anchor(self, x: Tensor, noise: Optional[np.ndarray] = None) -> SteAnchor:
        """Selection of a training forward at x (for finite-difference checks)."""
        self.forward(x, tape=None, training=True, noise=noise)
        if self.state.probs is None:
            raise InvalidArgumentError(f"{self.name}: fixed selection has no probabilities to anchor")
        return SteAnchor.capture(self.state.probs, self.cfg.c_sel)

    def score_grad_norm(self, tape: Tape) -> Optional[float]:
        """L2 norm of the gradient that reached the scores after backward()."""
        if self.last_scores is None or not self.last_scores.requires_grad:
            return None
        return float(np.linalg.norm(tape.grad(self.last_scores)))

    def selected_channels(self) -> List[int]:
        if self.state.indices is None:
            return []
        return sorted(set(int(i) for i in np.ravel(self.state.indices)))
