"""
Harness - Gradient Check Suite
Named finite-difference checks for every differentiable op and module.

Checks are looked up by name at run time, so a broken backward shows up in
the report under the op it belongs to.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from engine.exceptions import ConfigurationError
from engine.gradcheck import ForwardFn, GradCheckResult, check_gradients
from engine.layers import BatchNorm, Linear
from engine.ops import (
    BatchNormState,
    add,
    batch_norm,
    channel_conv1d,
    concat,
    cross_entropy,
    depthwise_conv,
    gather_channels,
    global_avg_pool,
    hardswish,
    linear,
    mul,
    pointwise_conv,
    relu,
    softmax,
)
from engine.tensor import Parameter, Tensor, resolve_dtype, use

from ach.bottleneck import AdaptiveBottleneck
from ach.ghost import GhostModule
from ach.normalization import DyNorm, dynorm_forward
from ach.operator import ACHLayer, EcaScorer, cross_hadamard_expand, select_channels
from ach.sampling import SteAnchor, hard_topk_ste, sample_gumbel, soft_probs, topk_indices
from ach.types import AchConfig, BlockSpec, GhostConfig, NormVariant

from .config import GradCheckSettings

logger = logging.getLogger(__name__)

SCOPES = ("op", "module", "all")
OP_SEEDS = 3
MODULE_SEEDS = 5
F32_MIN_STEP = 1e-3

# (forward, inputs, params) for one random instance
Instance = Tuple[ForwardFn, Dict[str, np.ndarray], List[Parameter]]
Builder = Callable[[np.random.Generator, np.dtype], Instance]


@dataclass(frozen=True)
class CheckSpec:
    name: str
    scope: str
    build: Builder
    seeds: Optional[int] = None  # None: GradCheckSettings.seeds


CHECKS: Dict[str, CheckSpec] = {}


def register(name: str, scope: str = "op", seeds: Optional[int] = OP_SEEDS):
    if scope not in ("op", "module"):
        raise ConfigurationError(f"Check scope must be op or module, got {scope}")

    def deco(fn: Builder) -> Builder:
        CHECKS[name] = CheckSpec(name=name, scope=scope, build=fn, seeds=seeds)
        return fn

    return deco


def _normal(rng, shape, dtype, scale=1.0):
    return (scale * rng.standard_normal(shape)).astype(dtype)


# ============================================================================
# Op checks
# ============================================================================

@register("add")
def _add(rng, dt):
    return lambda t, i: add(i["a"], i["b"]), {"a": _normal(rng, (2, 3, 4, 4), dt), "b": _normal(rng, (2, 3, 4, 4), dt)}, []


@register("mul")
def _mul(rng, dt):
    return lambda t, i: mul(i["a"], i["b"]), {"a": _normal(rng, (2, 3, 4, 4), dt), "b": _normal(rng, (2, 3, 4, 4), dt)}, []


@register("relu")
def _relu(rng, dt):
    # keep inputs away from the kink
    x = rng.standard_normal((2, 3, 4, 4))
    x = np.sign(x) * (0.1 + np.abs(x))
    return lambda t, i: relu(i["x"]), {"x": x.astype(dt)}, []


@register("hardswish")
def _hardswish(rng, dt):
    return lambda t, i: hardswish(i["x"]), {"x": _normal(rng, (2, 3, 4, 4), dt, 2.0)}, []


@register("concat")
def _concat(rng, dt):
    inputs = {"a": _normal(rng, (2, 2, 3, 3), dt), "b": _normal(rng, (2, 3, 3, 3), dt)}
    return lambda t, i: concat([i["a"], i["b"]], axis=1), inputs, []


@register("gather_channels")
def _gather(rng, dt):
    idx = np.array([2, 0, 2, 1])
    return lambda t, i: gather_channels(i["x"], idx), {"x": _normal(rng, (2, 3, 4, 4), dt)}, []


@register("pointwise_conv")
def _pointwise(rng, dt):
    w = Parameter(rng.standard_normal((5, 3)), name="w", dtype=dt)
    b = Parameter(rng.standard_normal(5), name="b", dtype=dt)
    fwd = lambda t, i: pointwise_conv(i["x"], use(w, t), use(b, t))
    return fwd, {"x": _normal(rng, (2, 3, 4, 4), dt)}, [w, b]


@register("depthwise_conv")
def _depthwise(rng, dt):
    w = Parameter(rng.standard_normal((3, 3, 3)), name="w", dtype=dt)
    return lambda t, i: depthwise_conv(i["x"], use(w, t)), {"x": _normal(rng, (2, 3, 5, 5), dt)}, [w]


@register("depthwise_conv_stride2")
def _depthwise_s2(rng, dt):
    w = Parameter(rng.standard_normal((3, 3, 3)), name="w", dtype=dt)
    return lambda t, i: depthwise_conv(i["x"], use(w, t), stride=2), {"x": _normal(rng, (2, 3, 6, 6), dt)}, [w]


@register("global_avg_pool")
def _pool(rng, dt):
    return lambda t, i: global_avg_pool(i["x"]), {"x": _normal(rng, (2, 3, 4, 4), dt)}, []


@register("channel_conv1d")
def _channel_conv(rng, dt):
    w = Parameter(rng.standard_normal(3), name="w", dtype=dt)
    b = Parameter(rng.standard_normal(1), name="b", dtype=dt)
    return lambda t, i: channel_conv1d(i["v"], use(w, t), use(b, t)), {"v": _normal(rng, (2, 6), dt)}, [w, b]


@register("linear")
def _linear(rng, dt):
    w = Parameter(rng.standard_normal((4, 3)), name="w", dtype=dt)
    b = Parameter(rng.standard_normal(4), name="b", dtype=dt)
    return lambda t, i: linear(i["x"], use(w, t), use(b, t)), {"x": _normal(rng, (5, 3), dt)}, [w, b]


@register("batch_norm")
def _batch_norm(rng, dt):
    gamma = Parameter(1.0 + 0.1 * rng.standard_normal(3), name="gamma", dtype=dt)
    beta = Parameter(rng.standard_normal(3), name="beta", dtype=dt)
    state = BatchNormState(channels=3)
    fwd = lambda t, i: batch_norm(i["x"], use(gamma, t), use(beta, t), state, training=True)
    return fwd, {"x": _normal(rng, (2, 3, 4, 4), dt)}, [gamma, beta]


@register("softmax")
def _softmax(rng, dt):
    return lambda t, i: softmax(i["v"]), {"v": _normal(rng, (3, 6), dt)}, []


@register("cross_entropy")
def _cross_entropy(rng, dt):
    labels = rng.integers(0, 4, size=5)
    return lambda t, i: cross_entropy(i["logits"], labels), {"logits": _normal(rng, (5, 4), dt)}, []


def _dynorm_builder(variant: NormVariant) -> Builder:
    def build(rng, dt):
        alpha = Parameter(1.0 + 0.2 * rng.standard_normal(3), name="alpha", dtype=dt)
        w = Parameter(1.0 + 0.2 * rng.standard_normal(3), name="w", dtype=dt)
        b = Parameter(0.1 * rng.standard_normal(3), name="b", dtype=dt)
        fwd = lambda t, i: dynorm_forward(i["x"], use(alpha, t), use(w, t), use(b, t), variant)
        return fwd, {"x": _normal(rng, (2, 3, 4, 4), dt, 2.0)}, [alpha, w, b]
    return build


for _variant in (NormVariant.SOFTSIGN, NormVariant.SIGMOID, NormVariant.ALGEBRAIC):
    register(f"dynorm_{_variant.value}")(_dynorm_builder(_variant))


@register("soft_probs")
def _soft_probs(rng, dt):
    noise = sample_gumbel(rng, (2, 6), dt)
    return lambda t, i: soft_probs(i["xi"], noise, tau=0.7), {"xi": _normal(rng, (2, 6), dt)}, []


@register("hard_topk_ste")
def _hard_topk(rng, dt):
    xi = _normal(rng, (2, 6), dt)
    anchor = SteAnchor.capture(softmax(Tensor(xi, dt)).data, 3)
    return lambda t, i: hard_topk_ste(softmax(i["xi"]), 3, anchor)[0], {"xi": xi}, []


@register("select_channels")
def _select(rng, dt):
    x = _normal(rng, (2, 5, 3, 3), dt)
    hard = _normal(rng, (2, 5), dt)
    idx = topk_indices(rng.standard_normal((2, 5)), 3)
    return lambda t, i: select_channels(i["x"], i["hard"], idx), {"x": x, "hard": hard}, []


@register("cross_hadamard_expand")
def _expand(rng, dt):
    return lambda t, i: cross_hadamard_expand(i["z"]), {"z": _normal(rng, (2, 4, 3, 3), dt)}, []


# ============================================================================
# Module checks
# ============================================================================

@register("eca_scorer", scope="module", seeds=MODULE_SEEDS)
def _eca(rng, dt):
    eca = EcaScorer(3, dtype=dt)
    eca.weight.assign(rng.standard_normal(3))
    eca.bias.assign(rng.standard_normal(1))
    return lambda t, i: eca.forward(i["x"], t), {"x": _normal(rng, (2, 6, 4, 4), dt)}, eca.parameters()


@register("dynorm_module", scope="module", seeds=MODULE_SEEDS)
def _dynorm_module(rng, dt):
    norm = DyNorm(4, dtype=dt)
    norm.alpha.assign(1.0 + 0.2 * rng.standard_normal(4))
    return lambda t, i: norm.forward(i["x"], t), {"x": _normal(rng, (2, 4, 3, 3), dt, 2.0)}, norm.parameters()


@register("batch_norm_module", scope="module", seeds=MODULE_SEEDS)
def _bn_module(rng, dt):
    bn = BatchNorm(4, dtype=dt)
    return lambda t, i: bn.forward(i["x"], t, training=True), {"x": _normal(rng, (3, 4, 3, 3), dt)}, bn.parameters()


@register("linear_module", scope="module", seeds=MODULE_SEEDS)
def _linear_module(rng, dt):
    layer = Linear(6, 4, rng, dtype=dt)
    return lambda t, i: layer.forward(i["x"], t), {"x": _normal(rng, (3, 6), dt)}, layer.parameters()


@register("ghost_module", scope="module", seeds=MODULE_SEEDS)
def _ghost(rng, dt):
    ghost = GhostModule(GhostConfig(c_in=4, c_out=8, primary=3), rng, dtype=dt)
    return lambda t, i: ghost.forward(i["x"], t), {"x": _normal(rng, (2, 4, 4, 4), dt)}, ghost.parameters()


@register("ach_layer", scope="module", seeds=None)
def _ach(rng, dt):
    seed = int(rng.integers(2 ** 31))
    layer = ACHLayer(AchConfig(c_in=8, c_sel=4), seed=seed, dtype=dt)
    x = _normal(rng, (2, 8, 4, 4), dt)
    noise = sample_gumbel(rng, (2, 8), dt)
    anchor = layer.capture_anchor(Tensor(x, dt), noise)
    fwd = lambda t, i: layer.forward(i["x"], t, training=True, noise=noise, anchor=anchor)
    return fwd, {"x": x}, layer.parameters()


@register("adaptive_bottleneck", scope="module", seeds=MODULE_SEEDS)
def _bottleneck(rng, dt):
    seed = int(rng.integers(2 ** 31))
    block = AdaptiveBottleneck(BlockSpec(c_in=4, c_out=4, kind="Hada", arg=3, kernel=3, stride=1),
                               rng, seed=seed, dtype=dt, act="hardswish")
    x = _normal(rng, (2, 4, 4, 4), dt)
    noise = sample_gumbel(rng, (2, 4), dt)
    anchor = block.ach.capture_anchor(Tensor(x, dt), noise)
    fwd = lambda t, i: block.forward(i["x"], t, training=True, noise=noise, anchor=anchor)
    return fwd, {"x": x}, block.parameters()


# ============================================================================
# Runner
# ============================================================================

@dataclass
class SuiteReport:
    scope: str
    dtype: str
    tol: float
    results: List[Tuple[str, str, GradCheckResult]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for _, _, r in self.results)

    @property
    def failures(self) -> List[Tuple[str, GradCheckResult]]:
        return [(name, r) for name, _, r in self.results if not r.passed]

    def failed_checks(self) -> List[str]:
        return sorted({name for name, _ in self.failures})

    def rows(self) -> List[list]:
        return [
            [name, scope, r.seed, f"{r.max_rel_error:.3e}", r.tol, "pass" if r.passed else "FAIL", r.worst_tensor()]
            for name, scope, r in self.results
        ]


REPORT_COLUMNS = ["check", "scope", "seed", "max_rel_error", "tol", "status", "worst_tensor"]


def select_checks(scope: str = "all", names: Optional[Sequence[str]] = None) -> List[CheckSpec]:
    if scope not in SCOPES:
        raise ConfigurationError(f"Unknown scope '{scope}'. Use one of: {', '.join(SCOPES)}")
    specs = [s for s in CHECKS.values() if scope == "all" or s.scope == scope]
    if names is not None:
        unknown = sorted(set(names) - set(CHECKS))
        if unknown:
            raise ConfigurationError(f"Unknown checks: {', '.join(unknown)}")
        specs = [s for s in specs if s.name in names]
    return specs


def run_suite(
    scope: str = "all",
    settings: Optional[GradCheckSettings] = None,
    dtype="f64",
    base_seed: int = 0,
    names: Optional[Sequence[str]] = None,
) -> SuiteReport:
    """
    Run the registered checks of a scope.

    Each check runs on `seeds` fresh random instances (seed = base_seed + i).
    In 32-bit the tolerance is relaxed to settings.tol_f32 with a warning.
    """
    settings = settings or GradCheckSettings()
    dt = resolve_dtype(dtype)
    tol, step = settings.tol, settings.step
    if dt == np.float32:
        tol, step = settings.tol_f32, max(settings.step, F32_MIN_STEP)
        logger.warning("32-bit gradient checks: tolerance relaxed to %g", tol)

    report = SuiteReport(scope=scope, dtype=dt.name, tol=tol)
    for spec in select_checks(scope, names):
        count = spec.seeds if spec.seeds is not None else settings.seeds
        for i in range(count):
            seed = base_seed + i
            forward, inputs, params = spec.build(np.random.default_rng(seed), dt)
            result = check_gradients(forward, inputs, params, name=spec.name, seed=seed, step=step, tol=tol)
            report.results.append((spec.name, spec.scope, result))
            if not result.passed:
                logger.error("grad-check %s seed=%d failed: max rel error %.3e (%s)",
                             spec.name, seed, result.max_rel_error, result.worst_tensor())
    logger.info("grad-check %s: %d results, %d failures", scope, len(report.results), len(report.failures))
    return report
