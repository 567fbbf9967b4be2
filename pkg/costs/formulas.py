"""
Costs - Expansion Formulas
MAC counts of pointwise, Ghost and ACH channel expansion, ratio curves.
"""

from typing import Iterable, List, Optional

from engine.exceptions import InvalidArgumentError

from .types import CurvePoint, ExpansionSpec


def to_flops(macs: int) -> int:
    return 2 * macs


def flops_pointwise(spec: ExpansionSpec) -> int:
    """m * n * f^2 MACs."""
    return spec.m * spec.n * spec.f ** 2


def flops_ghost(spec: ExpansionSpec) -> int:
    """m * s * f^2 (primary) + (n - s) * k^2 * f^2 (cheap op) MACs."""
    f2 = spec.f ** 2
    return spec.m * spec.s * f2 + (spec.n - spec.s) * spec.k ** 2 * f2


def flops_ach(spec: ExpansionSpec) -> int:
    """
    m^2 * f^2 (pointwise) + (n - m) * f^2 (one product per derived channel) MACs.

    Raises:
        InvalidArgumentError: n < m, or more derived channels than pairs
    """
    if spec.n < spec.m:
        raise InvalidArgumentError(f"ACH expansion needs n >= m, got m={spec.m}, n={spec.n}")
    pairs = spec.m * (spec.m - 1) // 2
    if spec.n - spec.m > pairs:
        raise InvalidArgumentError(
            f"{spec.n - spec.m} derived channels exceed the {pairs} pairs of {spec.m} channels"
        )
    f2 = spec.f ** 2
    return spec.m * spec.m * f2 + (spec.n - spec.m) * f2


def ratio_ghost(spec: ExpansionSpec) -> float:
    """Exact Ghost / pointwise quotient: s/n + ((n - s)/n) * (k^2/m)."""
    return flops_ghost(spec) / flops_pointwise(spec)


def ratio_ach(m: int, n: int) -> float:
    """(m^2 + n - m) / (m n), independent of f."""
    return (m * m + n - m) / (m * n)


def ratio_ach_terms(m: int, n: int) -> float:
    """The same quotient split as m/n + 1/m - 1/n."""
    return m / n + 1.0 / m - 1.0 / n


def curve_point(mode: str, m: int, n: int, f: int, k: int = 3, s: Optional[int] = None) -> CurvePoint:
    spec = ExpansionSpec(m=m, n=n, f=f, k=k, s=s)
    return CurvePoint(
        mode=mode, m=m, n=n, f=f,
        macs_pointwise=flops_pointwise(spec),
        macs_ghost=flops_ghost(spec),
        macs_ach=flops_ach(spec),
    )


def ratio_curves(
    mode: str,
    values: Optional[Iterable[int]] = None,
    f: int = 224,
    fixed_ratio: int = 4,
    fixed_channels: int = 64,
    k: int = 3,
) -> List[CurvePoint]:
    """
    Efficiency sweeps of the three expansions.

    channels: r = fixed_ratio, m over `values` (default 16..512 step 16).
    ratio:    m = fixed_channels, r over `values` (default 4..24).

    Raises:
        InvalidArgumentError: Unknown mode or empty sweep
    """
    if mode == "channels":
        ms = list(values) if values is not None else list(range(16, 513, 16))
        points = [curve_point(mode, m, m * fixed_ratio, f, k) for m in ms]
    elif mode == "ratio":
        rs = list(values) if values is not None else list(range(4, 25))
        points = [curve_point(mode, fixed_channels, fixed_channels * r, f, k) for r in rs]
    else:
        raise InvalidArgumentError(f"Curve mode must be channels or ratio, got '{mode}'")
    if not points:
        raise InvalidArgumentError("Curve sweep is empty")
    return points


CURVE_COLUMNS = (
    "mode", "m", "n", "r", "f",
    "macs_pointwise", "macs_ghost", "macs_ach",
    "flops_pointwise", "flops_ghost", "flops_ach",
    "ratio_ghost", "ratio_ach", "inv_r",
)


def curve_rows(points: Iterable[CurvePoint]) -> List[list]:
    rows = []
    for p in points:
        rows.append([
            p.mode, p.m, p.n, f"{p.r:g}", p.f,
            p.macs_pointwise, p.macs_ghost, p.macs_ach,
            to_flops(p.macs_pointwise), to_flops(p.macs_ghost), to_flops(p.macs_ach),
            f"{p.ratio_ghost:.6f}", f"{p.ratio_ach:.6f}", f"{1.0 / p.r:.6f}",
        ])
    return rows
