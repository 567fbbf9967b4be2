"""
Hadaptive - Costs Module
Analytic parameter and MAC accounting for channel expansions and architectures
"""

from .formulas import (
    CURVE_COLUMNS,
    to_flops,
    flops_pointwise,
    flops_ghost,
    flops_ach,
    ratio_ghost,
    ratio_ach,
    ratio_ach_terms,
    curve_point,
    ratio_curves,
    curve_rows,
)
from .arch_spec import parse_arch_spec, load_arch_spec, parse_line, layer_kind, ab_layers
from .report import REPORT_COLUMNS, model_report, report_rows, cna_costs, ab_costs, fn_costs

# Type definitions
from .types import (
    ExpansionSpec,
    CnaLayer,
    FnLayer,
    ArchSpec,
    LayerCost,
    CostReport,
    CurvePoint,
)

__all__ = [
    # Formulas
    'CURVE_COLUMNS',
    'to_flops',
    'flops_pointwise',
    'flops_ghost',
    'flops_ach',
    'ratio_ghost',
    'ratio_ach',
    'ratio_ach_terms',
    'curve_point',
    'ratio_curves',
    'curve_rows',
    # Architecture specs
    'parse_arch_spec',
    'load_arch_spec',
    'parse_line',
    'layer_kind',
    'ab_layers',
    # Reports
    'REPORT_COLUMNS',
    'model_report',
    'report_rows',
    'cna_costs',
    'ab_costs',
    'fn_costs',
    # Types
    'ExpansionSpec',
    'CnaLayer',
    'FnLayer',
    'ArchSpec',
    'LayerCost',
    'CostReport',
    'CurvePoint',
]
