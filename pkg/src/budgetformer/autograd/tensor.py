"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations record themselves on the active :class:`Tape` when at least one
input requires a gradient. Outside a ``with Tape():`` block nothing is
recorded, which is how inference runs.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from contextvars import ContextVar, Token
from dataclasses import dataclass
from types import TracebackType
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from budgetformer.errors import ContractError, DimensionError

DTYPE = np.float64

Array = NDArray[np.float64]
BackwardFn = Callable[[Array], Sequence[Array | None]]

_active_tape: ContextVar[Tape | None] = ContextVar("budgetformer_active_tape", default=None)


@dataclass(eq=False)
class TapeNode:
    """One recorded operation: its inputs, its output and its backward rule."""

    index: int
    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn
    tape: Tape


class Tape:
    """Ordered record of differentiable operations for one forward pass."""

    def __init__(self) -> None:
        self.nodes: list[TapeNode] = []
        self._token: Token[Tape | None] | None = None

    def __enter__(self) -> Tape:
        self._token = _active_tape.set(self)
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        if self._token is not None:
            _active_tape.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def record(
        self, op: str, inputs: tuple[Tensor, ...], output: Tensor, backward: BackwardFn
    ) -> TapeNode:
        node = TapeNode(len(self.nodes), op, inputs, output, backward, self)
        self.nodes.append(node)
        return node

    def backward(self, loss: Tensor) -> None:
        """Propagate d(loss)/d(x) into ``grad`` of every leaf that requires it.

        Leaf gradients accumulate across calls until :meth:`Tensor.zero_grad`.
        """
        if loss.data.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
        node = loss.tape_node
        if node is None or node.tape is not self:
            raise ContractError("loss was not recorded on this tape")

        pending: dict[int, Array] = {id(loss): np.ones_like(loss.data)}
        for current in reversed(self.nodes[: node.index + 1]):
            upstream = pending.pop(id(current.output), None)
            if upstream is None:
                continue
            for source, grad in zip(current.inputs, current.backward(upstream), strict=True):
                if grad is None or not source.requires_grad:
                    continue
                if source.tape_node is None:
                    source.grad = np.array(grad, dtype=DTYPE) if source.grad is None else (
                        source.grad + grad
                    )
                else:
                    key = id(source)
                    pending[key] = pending[key] + grad if key in pending else grad

    def clear(self) -> None:
        for node in self.nodes:
            node.output.tape_node = None
        self.nodes.clear()


def active_tape() -> Tape | None:
    """Return the tape operations are currently recorded on, if any."""
    return _active_tape.get()


class Tensor:
    """Row-major float64 array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "tape_node", "name")

    # Make ``ndarray <op> Tensor`` dispatch to the reflected Tensor operator
    __array_ufunc__ = None

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: str | None = None):
        array = np.array(data, dtype=DTYPE)
        if 0 in array.shape:
            raise DimensionError(f"tensor extents must be positive, got shape {array.shape}")
        self.data: Array = array
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self.tape_node: TapeNode | None = None
        self.name = name

    @classmethod
    def _wrap(cls, data: Array) -> Tensor:
        tensor = cls.__new__(cls)
        tensor.data = np.asarray(data, dtype=DTYPE)
        tensor.requires_grad = False
        tensor.grad = None
        tensor.tape_node = None
        tensor.name = None
        return tensor

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"<Tensor{label} shape={self.shape} requires_grad={self.requires_grad}>"

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def ndim(self) -> int:
        return int(self.data.ndim)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> Array:
        return self.data.copy()

    def detach(self) -> Tensor:
        return Tensor._wrap(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    # Arithmetic -----------------------------------------------------------

    def __add__(self, other: Tensor | ArrayLike) -> Tensor:
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> Tensor:
        return add(other, self)

    def __sub__(self, other: Tensor | ArrayLike) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: Tensor | ArrayLike) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> Tensor:
        return mul(other, self)

    def __truediv__(self, other: Tensor | ArrayLike) -> Tensor:
        return div(self, other)

    def __rtruediv__(self, other: ArrayLike) -> Tensor:
        return div(other, self)

    def __neg__(self) -> Tensor:
        return mul(self, -1.0)

    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __getitem__(self, key: Any) -> Tensor:
        return index(self, key)

    def exp(self) -> Tensor:
        return exp(self)

    def log(self) -> Tensor:
        return log(self)

    def sum(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return tensor_sum(self, axis, keepdims)

    def mean(self, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
        return mean(self, axis, keepdims)

    def reshape(self, shape: tuple[int, ...]) -> Tensor:
        return reshape(self, shape)

    def transpose(self, axes: tuple[int, ...]) -> Tensor:
        return transpose(self, axes)


def as_tensor(value: Tensor | ArrayLike) -> Tensor:
    """Wrap constants; tensors pass through unchanged."""
    return value if isinstance(value, Tensor) else Tensor(value)


def make_result(data: Array, op: str, inputs: tuple[Tensor, ...], rule: BackwardFn) -> Tensor:
    """Build an op output and record it on the active tape when needed."""
    out = Tensor._wrap(data)
    tape = _active_tape.get()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.tape_node = tape.record(op, inputs, out, rule)
    return out


def backward(loss: Tensor) -> None:
    """Run reverse-mode differentiation from a scalar loss."""
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss.tape_node is None:
        raise ContractError("loss is not on an active tape")
    loss.tape_node.tape.backward(loss)


def unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_pair(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from exc


def add(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    x, y = as_tensor(a), as_tensor(b)
    _broadcast_pair(x, y, "add")

    def rule(g: Array) -> tuple[Array, Array]:
        return unbroadcast(g, x.shape), unbroadcast(g, y.shape)

    return make_result(x.data + y.data, "add", (x, y), rule)


def sub(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    x, y = as_tensor(a), as_tensor(b)
    _broadcast_pair(x, y, "sub")

    def rule(g: Array) -> tuple[Array, Array]:
        return unbroadcast(g, x.shape), unbroadcast(-g, y.shape)

    return make_result(x.data - y.data, "sub", (x, y), rule)


def mul(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    x, y = as_tensor(a), as_tensor(b)
    _broadcast_pair(x, y, "mul")

    def rule(g: Array) -> tuple[Array, Array]:
        return unbroadcast(g * y.data, x.shape), unbroadcast(g * x.data, y.shape)

    return make_result(x.data * y.data, "mul", (x, y), rule)


def div(a: Tensor | ArrayLike, b: Tensor | ArrayLike) -> Tensor:
    x, y = as_tensor(a), as_tensor(b)
    _broadcast_pair(x, y, "div")
    out = x.data / y.data

    def rule(g: Array) -> tuple[Array, Array]:
        return unbroadcast(g / y.data, x.shape), unbroadcast(-g * out / y.data, y.shape)

    return make_result(out, "div", (x, y), rule)


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return make_result(out, "exp", (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return make_result(np.log(a.data), "log", (a,), lambda g: (g / a.data,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product over the last two axes, broadcasting leading axes."""
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError as exc:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}") from exc

    def rule(g: Array) -> tuple[Array, Array]:
        grad_a = np.matmul(g, np.swapaxes(b.data, -1, -2))
        grad_b = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return unbroadcast(grad_a, a.shape), unbroadcast(grad_b, b.shape)

    return make_result(np.matmul(a.data, b.data), "matmul", (a, b), rule)


def tensor_sum(
    a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def rule(g: Array) -> tuple[Array]:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return make_result(np.asarray(out), "sum", (a,), rule)


def mean(a: Tensor, axis: int | tuple[int, ...] | None = None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else axis
        count = int(np.prod([a.shape[i] for i in axes]))
    return tensor_sum(a, axis, keepdims) * (1.0 / count)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: cannot view {a.shape} as {shape}") from exc
    return make_result(out, "reshape", (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inverse = tuple(int(i) for i in np.argsort(axes))
    return make_result(
        np.transpose(a.data, axes), "transpose", (a,), lambda g: (np.transpose(g, inverse),)
    )


def index(a: Tensor, key: Any) -> Tensor:
    """Basic or integer-array indexing (row select, head slicing)."""
    out = np.array(a.data[key], dtype=DTYPE)

    def rule(g: Array) -> tuple[Array]:
        grad = np.zeros_like(a.data)
        np.add.at(grad, key, g)
        return (grad,)

    return make_result(out, "index", (a,), rule)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise DimensionError(f"concat: incompatible shapes {shapes}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def rule(g: Array) -> list[Array]:
        return list(np.split(g, bounds, axis=axis))

    return make_result(out, "concat", tuple(tensors), rule)
