"""
Engine - Finite-Difference Gradient Checker
Compares tape gradients with central differences of a random projection.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence

import numpy as np

from .exceptions import InvalidArgumentError
from .ops import mul, sum_all
from .tensor import Parameter, Tape, Tensor

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-5
DEFAULT_TOL = 1e-4
ERROR_FLOOR = 1e-6

# forward(tape_or_None, inputs) -> output tensor; parameters are pulled with use()
ForwardFn = Callable[[Optional[Tape], Dict[str, Tensor]], Tensor]


@dataclass
class GradCheckResult:
    """
    Outcome of one finite-difference comparison.

    Attributes:
        name: Check label (op or module name)
        seed: Seed of the random inputs and projection
        max_rel_error: Worst |a - n| / (floor + max(|a|, |n|)) over all entries
        tol: Tolerance the error is compared with
        per_tensor: Worst error per input / parameter name
    """
    name: str
    seed: int
    max_rel_error: float
    tol: float
    per_tensor: Dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.max_rel_error)) and self.max_rel_error < self.tol

    def worst_tensor(self) -> str:
        if not self.per_tensor:
            return ""
        return max(self.per_tensor, key=self.per_tensor.get)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = ERROR_FLOOR) -> float:
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.shape != n.shape:
        raise InvalidArgumentError(f"Gradient shapes differ: {a.shape} vs {n.shape}")
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - n) / (floor + np.maximum(np.abs(a), np.abs(n)))))


def _central_difference(loss_fn: Callable[[], float], buf: np.ndarray, step: float,
                        on_change: Callable[[], None]) -> np.ndarray:
    """d loss / d buf by perturbing each entry of a writable buffer in place."""
    grad = np.zeros(buf.shape, dtype=np.float64)
    flat = buf.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        on_change()
        plus = loss_fn()
        flat[i] = orig - step
        on_change()
        minus = loss_fn()
        flat[i] = orig
        on_change()
        gflat[i] = (plus - minus) / (2.0 * step)
    return grad


def check_gradients(
    forward: ForwardFn,
    inputs: Mapping[str, np.ndarray],
    params: Sequence[Parameter] = (),
    name: str = "check",
    seed: int = 0,
    step: float = DEFAULT_STEP,
    tol: float = DEFAULT_TOL,
    check_inputs: bool = True,
) -> GradCheckResult:
    """
    Check every gradient of loss = sum(forward(...) * R) for a fixed random R.

    The forward closure is evaluated once on a fresh Tape for the analytic
    gradients, then repeatedly with tape=None for the numeric ones, so it
    must be a pure function of its inputs and parameter values (any noise
    has to be captured in the closure).

    Args:
        forward: Builds the output from input tensors and parameters
        inputs: Named input arrays; their dtype is kept
        params: Parameters whose gradients are checked
        name: Label for the result
        seed: Seeds the projection R
        step: Central-difference step h
        tol: Pass threshold on the max relative error
        check_inputs: Also compare gradients with respect to the inputs

    Returns:
        GradCheckResult
    """
    arrays = {k: np.array(v) for k, v in inputs.items()}
    for p in params:
        p.zero_grad()

    tape = Tape()
    leaves = {k: tape.leaf(v, k) for k, v in arrays.items()}
    out = forward(tape, leaves)
    rng = np.random.default_rng(seed)
    projection = rng.standard_normal(out.shape).astype(out.dtype)
    tape.backward(sum_all(mul(out, Tensor(projection, out.dtype))))

    analytic = {f"input:{k}": np.array(tape.grad(leaf)) for k, leaf in leaves.items()}
    for i, p in enumerate(params):
        analytic[f"param:{p.name or i}"] = p.grad.copy()

    consts: Dict[str, Tensor] = {}

    def refresh_inputs() -> None:
        consts.clear()
        consts.update({k: Tensor(v, v.dtype) for k, v in arrays.items()})

    def loss_value() -> float:
        return float(np.sum(forward(None, dict(consts)).data.astype(np.float64) * projection))

    refresh_inputs()
    per_tensor: Dict[str, float] = {}

    if check_inputs:
        for k, buf in arrays.items():
            numeric = _central_difference(loss_value, buf, step, refresh_inputs)
            per_tensor[f"input:{k}"] = relative_error(analytic[f"input:{k}"], numeric)

    for i, p in enumerate(params):
        buf = p.value.numpy()
        original = buf.copy()

        def push(p=p, buf=buf):
            p.assign(buf)

        numeric = _central_difference(loss_value, buf, step, push)
        p.assign(original)
        key = f"param:{p.name or i}"
        per_tensor[key] = relative_error(analytic[key], numeric)

    worst = max(per_tensor.values()) if per_tensor else 0.0
    result = GradCheckResult(name=name, seed=seed, max_rel_error=worst, tol=tol, per_tensor=per_tensor)
    logger.debug("grad-check %s seed=%d max_rel_error=%.3e (%s)", name, seed, worst,
                 "ok" if result.passed else "FAIL")
    return result
