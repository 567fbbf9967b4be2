"""
Engine - Tensor, Tape and Parameter
Dense immutable tensors recorded on an explicit reverse-mode tape.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import InvalidArgumentError, InvalidStateError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_DTYPE = np.float32
SUPPORTED_DTYPES = (np.dtype(np.float32), np.dtype(np.float64))

_DTYPE_ALIASES = {
    "f32": np.float32,
    "float32": np.float32,
    "f64": np.float64,
    "float64": np.float64,
}

VJP = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def resolve_dtype(dtype: Union[str, type, np.dtype, None]) -> np.dtype:
    """
    Resolve a dtype name ("f32", "f64", "float32", ...) or numpy dtype.

    Raises:
        InvalidArgumentError: For anything other than 32/64-bit floats
    """
    if dtype is None:
        return np.dtype(DEFAULT_DTYPE)
    if isinstance(dtype, str):
        key = dtype.lower()
        if key not in _DTYPE_ALIASES:
            raise InvalidArgumentError(f"Unsupported dtype: {dtype}. Use f32 or f64")
        return np.dtype(_DTYPE_ALIASES[key])
    resolved = np.dtype(dtype)
    if resolved not in SUPPORTED_DTYPES:
        raise InvalidArgumentError(f"Unsupported dtype: {resolved}. Use float32 or float64")
    return resolved


class Tensor:
    """
    Dense n-dimensional array with an optional handle into a Tape.

    The buffer is read-only; every op produces a new Tensor. Canonical
    layouts are [C], [N,C], [C,H,W] and [N,C,H,W], row-major.
    """

    __slots__ = ("data", "tape", "node")

    def __init__(self, data, dtype=None, tape: "Optional[Tape]" = None, node: Optional[int] = None):
        if dtype is None and isinstance(data, np.ndarray) and data.dtype in SUPPORTED_DTYPES:
            resolved = data.dtype
        else:
            resolved = resolve_dtype(dtype)
        arr = np.array(data, dtype=resolved)
        arr.flags.writeable = False
        self.data = arr
        self.tape = tape
        self.node = node

    @classmethod
    def _wrap(cls, arr: np.ndarray, tape: "Optional[Tape]" = None, node: Optional[int] = None) -> "Tensor":
        """Wrap a freshly computed array without copying it."""
        out = cls.__new__(cls)
        arr = np.asarray(arr)
        if arr.dtype not in SUPPORTED_DTYPES:
            arr = arr.astype(DEFAULT_DTYPE)
        arr.flags.writeable = False
        out.data = arr
        out.tape = tape
        out.node = node
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def elems(self) -> np.ndarray:
        """Contiguous row-major view of the buffer."""
        return self.data.reshape(-1)

    @property
    def requires_grad(self) -> bool:
        return self.tape is not None and self.node is not None

    def numpy(self) -> np.ndarray:
        """Writable copy of the buffer."""
        return np.array(self.data)

    def item(self) -> float:
        if self.size != 1:
            raise InvalidArgumentError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Same values, off the tape."""
        return Tensor._wrap(self.data)

    def __repr__(self) -> str:
        where = f"node={self.node}" if self.requires_grad else "const"
        return f"<Tensor shape={self.shape}, dtype={self.dtype}, {where}>"

    def __add__(self, other: "Tensor") -> "Tensor":
        from .ops import add
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from .ops import sub
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from .ops import mul
        return mul(self, other)

    def __len__(self) -> int:
        return self.shape[0]


class Parameter:
    """
    Learnable value with a gradient buffer of identical shape.

    Attributes:
        name: Label used in reports and grad-check output
        value: Current value (immutable Tensor, replaced on update)
        grad: Accumulated gradient (numpy buffer, zeroed by zero_grad)
    """

    def __init__(self, value, name: str = "", dtype=None):
        self.name = name
        self.value = Tensor(value, dtype)
        self.grad = np.zeros(self.value.shape, dtype=self.value.dtype)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def dtype(self) -> np.dtype:
        return self.value.dtype

    def zero_grad(self) -> None:
        self.grad = np.zeros(self.value.shape, dtype=self.value.dtype)

    def assign(self, new_value: np.ndarray) -> None:
        """Replace the value, keeping shape and dtype."""
        arr = np.asarray(new_value, dtype=self.dtype)
        if arr.shape != self.shape:
            raise InvalidArgumentError(
                f"Parameter '{self.name}' expects shape {self.shape}, got {arr.shape}"
            )
        self.value = Tensor(arr, self.dtype)

    def astype(self, dtype) -> None:
        """Convert value and grad in place to another float precision."""
        resolved = resolve_dtype(dtype)
        self.value = Tensor(self.value.data, resolved)
        self.grad = self.grad.astype(resolved)

    def __repr__(self) -> str:
        return f"<Parameter '{self.name}' shape={self.shape} dtype={self.dtype}>"


@dataclass
class _Node:
    name: str
    parents: Tuple[Optional[int], ...]
    vjp: Optional[VJP]
    param: Optional[Parameter] = None


class Tape:
    """
    Append-only record of operations for one forward pass.

    Nodes are stored in creation order, so parents always precede their
    children. backward() walks them once in reverse and the tape is then
    consumed; a new forward pass needs a new Tape.
    """

    def __init__(self, debug: bool = False):
        self.nodes: List[_Node] = []
        self.grads: Dict[int, np.ndarray] = {}
        self.debug = debug
        self._consumed = False
        self._watched: Dict[int, Tensor] = {}

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def consumed(self) -> bool:
        return self._consumed

    def _check_open(self) -> None:
        if self._consumed:
            raise InvalidStateError("Tape already consumed by backward(); record a new forward pass")

    def watch(self, param: Parameter) -> Tensor:
        """Leaf tensor for a parameter; gradients land in param.grad."""
        self._check_open()
        cached = self._watched.get(id(param))
        if cached is not None:
            return cached
        self.nodes.append(_Node(name=f"param:{param.name}", parents=(), vjp=None, param=param))
        leaf = Tensor._wrap(param.value.data, tape=self, node=len(self.nodes) - 1)
        self._watched[id(param)] = leaf
        return leaf

    def leaf(self, value: Union[Tensor, np.ndarray], name: str = "input") -> Tensor:
        """Leaf tensor for a plain input whose gradient is read via grad()."""
        self._check_open()
        data = value.data if isinstance(value, Tensor) else Tensor(value).data
        self.nodes.append(_Node(name=name, parents=(), vjp=None))
        return Tensor._wrap(data, tape=self, node=len(self.nodes) - 1)

    def record(self, name: str, value: np.ndarray, parents: Sequence[Tensor], vjp: VJP) -> Tensor:
        self._check_open()
        if self.debug and not np.all(np.isfinite(value)):
            raise NumericalError(f"{name} produced non-finite values")
        parent_ids = tuple(p.node if p.tape is self else None for p in parents)
        self.nodes.append(_Node(name=name, parents=parent_ids, vjp=vjp))
        return Tensor._wrap(value, tape=self, node=len(self.nodes) - 1)

    def backward(self, loss: Tensor) -> None:
        """
        Reverse-mode accumulation from a scalar loss.

        Raises:
            InvalidStateError: If loss was not recorded on this tape or the
                tape was already consumed
            InvalidArgumentError: If loss is not a scalar
        """
        self._check_open()
        if loss.tape is not self or loss.node is None:
            raise InvalidStateError("backward() called on a tensor that is not on this tape")
        if loss.size != 1:
            raise InvalidArgumentError(f"backward() needs a scalar loss, got shape {loss.shape}")

        grads = self.grads
        grads[loss.node] = np.ones(loss.shape, dtype=loss.dtype)
        for idx in range(loss.node, -1, -1):
            g = grads.get(idx)
            if g is None:
                continue
            node = self.nodes[idx]
            if node.param is not None:
                node.param.grad += g
                continue
            if node.vjp is None:
                continue
            for pid, pg in zip(node.parents, node.vjp(g)):
                if pid is None or pg is None:
                    continue
                prev = grads.get(pid)
                grads[pid] = pg if prev is None else prev + pg
        self._consumed = True
        logger.debug("backward visited %d nodes", loss.node + 1)

    def grad(self, tensor: Tensor) -> np.ndarray:
        """Gradient of the last backward() with respect to a recorded tensor."""
        if tensor.tape is not self or tensor.node is None:
            raise InvalidStateError("Tensor is not recorded on this tape")
        g = self.grads.get(tensor.node)
        if g is None:
            return np.zeros(tensor.shape, dtype=tensor.dtype)
        return g


def record(name: str, value: np.ndarray, parents: Sequence[Tensor], vjp: VJP) -> Tensor:
    """
    Record an op on whichever tape its parents live on.

    Outputs of ops whose parents are all constants are constants too.

    Raises:
        InvalidStateError: If parents live on different tapes
    """
    tapes = {id(p.tape): p.tape for p in parents if p.tape is not None}
    if not tapes:
        return Tensor._wrap(value)
    if len(tapes) > 1:
        raise InvalidStateError(f"{name}: inputs are recorded on different tapes")
    tape = next(iter(tapes.values()))
    return tape.record(name, value, parents, vjp)


def use(param: Parameter, tape: Optional[Tape]) -> Tensor:
    """Parameter as a Tensor: watched on the tape, or its constant value."""
    if tape is None:
        return param.value
    return tape.watch(param)


def as_tensor(value, dtype=None) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, dtype)
