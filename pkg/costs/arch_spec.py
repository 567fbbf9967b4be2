"""
Costs - Architecture Spec Parser
Line-oriented layer grammar:

    CNA in out k stride norm act
    AB  in out {Ghost|Hada} arg k stride
    FN  in classes hidden dropout

Blank lines and text after '#' are ignored.
"""

import logging
from pathlib import Path
from typing import List, Union

from engine.exceptions import ConfigurationError, SpecParseError

from ach.types import BlockSpec

from .types import ArchSpec, CnaLayer, FnLayer

logger = logging.getLogger(__name__)

ARITY = {"CNA": 6, "AB": 6, "FN": 4}


def _int(token: str, what: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise SpecParseError(f"{what} must be an integer, got '{token}'", line_number) from None


def _float(token: str, what: str, line_number: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise SpecParseError(f"{what} must be a number, got '{token}'", line_number) from None


def parse_line(text: str, line_number: int):
    """Parse one non-empty line into a layer entry."""
    tokens = text.replace(",", " ").split()
    kind = tokens[0].upper()
    if kind not in ARITY:
        raise SpecParseError(f"Unknown layer type '{tokens[0]}' (expected CNA, AB or FN)", line_number)
    args = tokens[1:]
    if len(args) != ARITY[kind]:
        raise SpecParseError(f"{kind} takes {ARITY[kind]} values, got {len(args)}", line_number)

    try:
        if kind == "CNA":
            return CnaLayer(
                c_in=_int(args[0], "in", line_number),
                c_out=_int(args[1], "out", line_number),
                kernel=_int(args[2], "kernel", line_number),
                stride=_int(args[3], "stride", line_number),
                norm=args[4],
                act=args[5],
            )
        if kind == "AB":
            return BlockSpec(
                c_in=_int(args[0], "in", line_number),
                c_out=_int(args[1], "out", line_number),
                kind=args[2],
                arg=_float(args[3], "arg", line_number),
                kernel=_int(args[4], "kernel", line_number),
                stride=_int(args[5], "stride", line_number),
            )
        return FnLayer(
            c_in=_int(args[0], "in", line_number),
            classes=_int(args[1], "classes", line_number),
            hidden=_int(args[2], "hidden", line_number),
            dropout=_float(args[3], "dropout", line_number),
        )
    except SpecParseError:
        raise
    except ConfigurationError as e:
        raise SpecParseError(str(e), line_number) from e


def parse_arch_spec(text: str, name: str = "model") -> ArchSpec:
    """
    Parse spec text, checking that consecutive layers chain their widths.

    Raises:
        SpecParseError: Malformed line or width mismatch, with its line number
    """
    spec = ArchSpec(name=name)
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        layer = parse_line(line, number)
        if spec.layers:
            prev = spec.layers[-1]
            if isinstance(prev, FnLayer):
                raise SpecParseError("FN must be the last layer", number)
            if prev.c_out != layer.c_in:
                raise SpecParseError(f"Layer input {layer.c_in} does not match previous output {prev.c_out}", number)
        spec.layers.append(layer)
        spec.lines.append(number)
    if not spec.layers:
        raise SpecParseError("Spec contains no layers")
    logger.debug("Parsed %d layers for %s", len(spec.layers), name)
    return spec


def load_arch_spec(path: Union[str, Path]) -> ArchSpec:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Architecture spec not found: {path}")
    return parse_arch_spec(path.read_text(encoding="utf-8"), name=path.stem)


def layer_kind(layer) -> str:
    if isinstance(layer, CnaLayer):
        return "CNA"
    if isinstance(layer, BlockSpec):
        return "AB"
    return "FN"


def ab_layers(spec: ArchSpec) -> List[BlockSpec]:
    return [layer for layer in spec.layers if isinstance(layer, BlockSpec)]
