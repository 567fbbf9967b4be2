"""
Costs - Architecture Report
Per-item parameter and MAC accounting of a parsed architecture.
"""

import logging
from pathlib import Path
from typing import List, Tuple, Union

from engine.exceptions import InvalidArgumentError

from ach.types import BlockSpec

from .arch_spec import load_arch_spec
from .types import ArchSpec, CnaLayer, CostReport, FnLayer, LayerCost

logger = logging.getLogger(__name__)

ECA_KERNEL = 3
GHOST_CHEAP_KERNEL = 3
DYNORM_MACS_PER_ELEMENT = 2  # four elementwise ops

REPORT_COLUMNS = ("name", "kind", "params", "macs", "flops", "out_c", "out_h", "out_w")


def _out_side(h: int, stride: int) -> int:
    return -(-h // stride)


def _bn(channels: int) -> int:
    return 2 * channels


def cna_costs(layer: CnaLayer, prefix: str, h: int) -> Tuple[List[LayerCost], int]:
    ho = _out_side(h, layer.stride)
    k2 = layer.kernel ** 2
    params = layer.c_in * layer.c_out * k2 + (_bn(layer.c_out) if layer.norm == "BN" else 0)
    macs = layer.c_in * layer.c_out * k2 * ho * ho
    return [LayerCost(f"{prefix}.CNA", "CNA", params, macs, (layer.c_out, ho, ho))], ho


def ab_costs(spec: BlockSpec, prefix: str, h: int, eca_kernel: int = ECA_KERNEL) -> Tuple[List[LayerCost], int]:
    """
    Expansion items (Ghost, or ACH core + ECA + DyNorm), then depthwise and
    projection, each with its batch norm.
    """
    items: List[LayerCost] = []
    area = h * h
    c_in = spec.c_in
    hidden = spec.hidden_channels

    if spec.kind == "Hada":
        products = hidden - c_in
        items.append(LayerCost(f"{prefix}.AB.ach", "AB", c_in * c_in + _bn(c_in),
                               c_in * c_in * area + products * area, (hidden, h, h)))
        items.append(LayerCost(f"{prefix}.AB.eca", "AB", eca_kernel + 1,
                               c_in * area + c_in * eca_kernel, (c_in, 1, 1)))
        items.append(LayerCost(f"{prefix}.AB.dynorm", "AB", 3 * products,
                               DYNORM_MACS_PER_ELEMENT * products * area, (products, h, h)))
    else:
        primary = hidden - hidden // 2
        ghosts = hidden - primary
        k2 = GHOST_CHEAP_KERNEL ** 2
        params = c_in * primary + _bn(primary) + ghosts * k2 + _bn(ghosts)
        macs = c_in * primary * area + ghosts * k2 * area
        items.append(LayerCost(f"{prefix}.AB.ghost", "AB", params, macs, (hidden, h, h)))

    ho = _out_side(h, spec.stride)
    k2 = spec.kernel ** 2
    items.append(LayerCost(f"{prefix}.AB.dw", "AB", hidden * k2 + _bn(hidden),
                           hidden * k2 * ho * ho, (hidden, ho, ho)))
    items.append(LayerCost(f"{prefix}.AB.proj", "AB", hidden * spec.c_out + _bn(spec.c_out),
                           hidden * spec.c_out * ho * ho, (spec.c_out, ho, ho)))
    return items, ho


def fn_costs(layer: FnLayer, prefix: str, h: int) -> Tuple[List[LayerCost], int]:
    return [
        LayerCost(f"{prefix}.FN.pool", "FN", 0, layer.c_in * h * h, (layer.c_in, 1, 1)),
        LayerCost(f"{prefix}.FN.hidden", "FN", layer.c_in * layer.hidden + layer.hidden,
                  layer.c_in * layer.hidden, (layer.hidden, 1, 1)),
        LayerCost(f"{prefix}.FN.classifier", "FN", layer.hidden * layer.classes + layer.classes,
                  layer.hidden * layer.classes, (layer.classes, 1, 1)),
    ], 1


def model_report(arch: Union[str, Path, ArchSpec], input_size: int = 224) -> CostReport:
    """
    Static parameter / MAC accounting at input_size x input_size.

    Args:
        arch: Parsed spec or a path to a spec file
        input_size: Input resolution

    Raises:
        SpecParseError: From loading the file
        InvalidArgumentError: Non-positive resolution
    """
    if input_size < 1:
        raise InvalidArgumentError(f"Input size must be positive, got {input_size}")
    spec = arch if isinstance(arch, ArchSpec) else load_arch_spec(arch)
    report = CostReport(name=spec.name, input_size=input_size)
    h = input_size
    for index, layer in enumerate(spec.layers):
        if isinstance(layer, CnaLayer):
            items, h = cna_costs(layer, str(index), h)
        elif isinstance(layer, BlockSpec):
            items, h = ab_costs(layer, str(index), h)
        else:
            items, h = fn_costs(layer, str(index), h)
        report.layers.extend(items)
    logger.info("%s @ %d: %.2fM params, %.1fM MACs", spec.name, input_size,
                report.total_params / 1e6, report.total_macs / 1e6)
    return report


def report_rows(report: CostReport) -> List[list]:
    rows = [
        [c.name, c.kind, c.params, c.macs, c.flops, *c.out_shape]
        for c in report.layers
    ]
    rows.append(["total", "", report.total_params, report.total_macs, report.total_flops, "", "", ""])
    return rows
