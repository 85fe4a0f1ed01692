"""
Dense float64 tensors with reverse-mode automatic differentiation

Every differentiable operation appends one node to the active
ComputationRecord; outside ``recording()`` nothing is recorded. ``backward``
walks the record in strict reverse append order, so gradient accumulation is
deterministic. Leaves are tensors created with ``requires_grad=True``;
everything else is either a constant or an intermediate result owned by a
record.
"""
import math
import threading
from contextlib import contextmanager
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from funlora.exceptions import AutodiffError, ShapeError

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


class _Node:
    """One recorded operation"""

    __slots__ = ("op", "inputs", "backward_fn", "record", "generation", "index")

    def __init__(self, op, inputs, backward_fn, record, index):
        self.op = op
        self.inputs = inputs
        self.backward_fn = backward_fn
        self.record = record
        self.generation = record.generation
        self.index = index

    @property
    def alive(self) -> bool:
        return self.record.generation == self.generation


class ComputationRecord:
    """Append-only list of recorded operations"""

    def __init__(self):
        self.nodes: List[_Node] = []
        self.generation = 0

    def append(self, op: str, inputs: Tuple["Tensor", ...], backward_fn: Callable) -> _Node:
        node = _Node(op, inputs, backward_fn, self, len(self.nodes))
        self.nodes.append(node)
        return node

    def clear(self) -> None:
        """Free every node; tensors produced under this record become constants"""
        self.nodes = []
        self.generation += 1

    def __len__(self) -> int:
        return len(self.nodes)


_local = threading.local()


def _state():
    if not hasattr(_local, "stack"):
        _local.stack = []
    return _local


def active_record() -> Optional[ComputationRecord]:
    """Record new operations are appended to, or None when recording is off"""
    state = _state()
    return state.stack[-1] if state.stack else None


@contextmanager
def recording(record: Optional[ComputationRecord] = None) -> Iterator[ComputationRecord]:
    """Record into a fresh record, cleared on exit"""
    state = _state()
    record = record or ComputationRecord()
    state.stack.append(record)
    try:
        yield record
    finally:
        state.stack.pop()
        record.clear()


@contextmanager
def no_grad() -> Iterator[None]:
    """Evaluate without recording anything"""
    state = _state()
    state.stack.append(None)
    try:
        yield
    finally:
        state.stack.pop()


class Tensor:
    """Dense n-dimensional float64 array"""

    __array_priority__ = 100

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.node: Optional[_Node] = None
        self.grad: Optional[np.ndarray] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def tracked(self) -> bool:
        """Whether gradients can flow through this tensor"""
        return self.requires_grad or (self.node is not None and self.node.alive)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # Operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return pow_by(self, exponent)

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis: Optional[int] = None) -> "Tensor":
        return reduce("sum", self, axis)

    def mean(self, axis: Optional[int] = None) -> "Tensor":
        return reduce("mean", self, axis)


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(data: np.ndarray, op: str, inputs: Tuple[Tensor, ...], backward_fn: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = False
    out.node = None
    out.grad = None
    out.name = None
    record = active_record()
    if record is not None and any(t.tracked for t in inputs):
        out.node = record.append(op, inputs, backward_fn)
    return out


def _is_scalar(t: Tensor) -> bool:
    return t.size == 1


def _check_binary(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape and not (_is_scalar(a) or _is_scalar(b)):
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ and neither is a scalar")


def _unbroadcast(grad: np.ndarray, target: Tensor) -> np.ndarray:
    if grad.shape == target.shape:
        return grad
    return np.full(target.shape, grad.sum())


# ---------------------------------------------------------------------------
# Linear algebra


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product of two 2-D tensors"""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        return g @ b_data.T, a_data.T @ g

    return _result(a_data @ b_data, "matmul", (a, b), backward_fn)


def transpose(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"transpose needs a 2-D tensor, got {a.shape}")
    return _result(a.data.T.copy(), "transpose", (a,), lambda g: (g.T,))


def reshape(a: ArrayLike, shape: Sequence[int]) -> Tensor:
    """Row-major reshape; element order is preserved"""
    a = as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {a.shape} into {tuple(shape)}") from exc
    source_shape = a.shape
    return _result(data, "reshape", (a,), lambda g: (g.reshape(source_shape),))


def getitem(a: ArrayLike, key) -> Tensor:
    """numpy-style indexing; the backward pass scatter-adds into the source"""
    a = as_tensor(a)
    if isinstance(key, Tensor):
        key = key.data.astype(np.int64)
    data = np.array(a.data[key], dtype=np.float64)
    source_shape = a.shape

    def backward_fn(g):
        full = np.zeros(source_shape)
        np.add.at(full, key, g)
        return (full,)

    return _result(data, "getitem", (a,), backward_fn)


def concat(tensors: Sequence[ArrayLike], axis: int = 0) -> Tensor:
    tensors = tuple(as_tensor(t) for t in tensors)
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward_fn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _result(data, "concat", tensors, backward_fn)


# ---------------------------------------------------------------------------
# Element-wise operations


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b, "add")

    def backward_fn(g):
        return _unbroadcast(g, a), _unbroadcast(g, b)

    return _result(a.data + b.data, "add", (a, b), backward_fn)


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b, "sub")

    def backward_fn(g):
        return _unbroadcast(g, a), _unbroadcast(-g, b)

    return _result(a.data - b.data, "sub", (a, b), backward_fn)


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_binary(a, b, "mul")
    a_data, b_data = a.data, b.data

    def backward_fn(g):
        return _unbroadcast(g * b_data, a), _unbroadcast(g * a_data, b)

    return _result(a_data * b_data, "mul", (a, b), backward_fn)


def scale(a: ArrayLike, c: float) -> Tensor:
    a = as_tensor(a)
    c = float(c)
    return _result(a.data * c, "scale", (a,), lambda g: (g * c,))


def cos(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    a_data = a.data
    return _result(np.cos(a_data), "cos", (a,), lambda g: (-g * np.sin(a_data),))


def sin(a: ArrayLike) -> Tensor:
    a = as_tensor(a)
    a_data = a.data
    return _result(np.sin(a_data), "sin", (a,), lambda g: (g * np.cos(a_data),))


def abs(a: ArrayLike) -> Tensor:  # noqa: A001 - mirrors the op name
    a = as_tensor(a)
    a_data = a.data
    return _result(np.abs(a_data), "abs", (a,), lambda g: (g * np.sign(a_data),))


def sign(a: ArrayLike) -> Tensor:
    """Sign of each entry; contributes zero gradient everywhere"""
    a = as_tensor(a)
    return _result(np.sign(a.data), "sign", (a,), lambda g: (np.zeros_like(g),))


def pow_by(a: ArrayLike, exponent: Union[float, int, Tensor]) -> Tensor:
    """Element-wise power with a constant or a scalar-tensor exponent

    Where the base is zero the derivative is taken as 0, which is the
    subgradient used by the sign/abs power surrogate.
    """
    a = as_tensor(a)
    a_data = a.data
    if isinstance(exponent, Tensor):
        if exponent.size != 1:
            raise ShapeError(f"pow_by exponent must be a scalar, got shape {exponent.shape}")
        e_tensor = exponent
        e = float(exponent.data.reshape(-1)[0])
    else:
        e_tensor = None
        e = float(exponent)
    if not math.isfinite(e):
        raise AutodiffError(f"pow_by exponent must be finite, got {e}")
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.power(a_data, e)

    def backward_fn(g):
        with np.errstate(divide="ignore", invalid="ignore"):
            if e.is_integer() and e >= 1.0:
                d_base = e * np.power(a_data, e - 1.0)
            else:
                d_base = np.where(a_data != 0.0, e * np.power(a_data, e - 1.0), 0.0)
            grads = [g * d_base]
            if e_tensor is not None:
                positive = a_data > 0.0
                log_base = np.log(np.where(positive, a_data, 1.0))
                d_exp = np.where(positive, data * log_base, 0.0)
                grads.append(np.full(e_tensor.shape, (g * d_exp).sum()))
        return tuple(grads)

    inputs = (a,) if e_tensor is None else (a, e_tensor)
    return _result(data, "pow_by", inputs, backward_fn)


def silu(a: ArrayLike) -> Tensor:
    """x * sigmoid(x)"""
    a = as_tensor(a)
    a_data = a.data
    sig = 1.0 / (1.0 + np.exp(-a_data))

    def backward_fn(g):
        return (g * sig * (1.0 + a_data * (1.0 - sig)),)

    return _result(a_data * sig, "silu", (a,), backward_fn)


_UNARY = {"cos": cos, "sin": sin, "abs": abs, "sign": sign, "silu": silu}
_BINARY = {"add": add, "sub": sub, "mul": mul}


def elementwise(op: str, a: ArrayLike, b: Optional[ArrayLike] = None, *, e: Optional[float] = None,
                c: Optional[float] = None) -> Tensor:
    """Dispatch an element-wise operation by name

    ``pow_by`` takes its exponent through ``e`` (or ``b``), ``scale`` its
    factor through ``c``.
    """
    if op in _BINARY:
        if b is None:
            raise ShapeError(f"{op} needs two operands")
        return _BINARY[op](a, b)
    if op in _UNARY:
        return _UNARY[op](a)
    if op == "pow_by":
        return pow_by(a, e if e is not None else b)
    if op == "scale":
        return scale(a, c if c is not None else b)
    raise ValueError(f"unknown element-wise operation: {op}")


# ---------------------------------------------------------------------------
# Reductions and losses


def reduce(op: str, a: ArrayLike, axis: Optional[int] = None) -> Tensor:
    """Sum or mean over all entries or along one axis"""
    a = as_tensor(a)
    if op not in ("sum", "mean"):
        raise ValueError(f"unknown reduction: {op}")
    if axis is not None and not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"axis {axis} out of range for shape {a.shape}")
    source_shape = a.shape
    count = a.size if axis is None else a.shape[axis]
    data = a.data.sum(axis=axis) if op == "sum" else a.data.mean(axis=axis)
    factor = 1.0 if op == "sum" else 1.0 / count

    def backward_fn(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g * factor, source_shape).copy(),)

    return _result(np.asarray(data, dtype=np.float64), op, (a,), backward_fn)


def softmax_cross_entropy(logits: ArrayLike, targets: Sequence[int]) -> Tensor:
    """Mean cross-entropy of integer targets under softmax(logits)"""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"cross-entropy needs (m, K) logits and m targets, got {logits.shape}, {targets.shape}")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(targets.shape[0])
    loss = -log_probs[rows, targets].mean()

    def backward_fn(g):
        probs = np.exp(log_probs)
        probs[rows, targets] -= 1.0
        return (g.reshape(-1)[0] * probs / targets.shape[0],)

    return _result(np.asarray(loss), "softmax_cross_entropy", (logits,), backward_fn)


# ---------------------------------------------------------------------------
# Backward pass


def backward(loss: Tensor) -> Dict[Tensor, np.ndarray]:
    """Gradients of a scalar loss with respect to every requires_grad leaf

    Gradients are accumulated into ``leaf.grad`` and also returned keyed by
    leaf.
    """
    if loss.size != 1:
        raise AutodiffError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss.node is None:
        if not loss.requires_grad:
            return {}
        seed = np.ones(loss.shape)
        loss.grad = seed if loss.grad is None else loss.grad + seed
        return {loss: seed}
    if not loss.node.alive:
        raise AutodiffError("loss is detached: its computation record was cleared")

    record = loss.node.record
    node_grads: Dict[_Node, np.ndarray] = {loss.node: np.ones(loss.shape)}
    leaf_grads: Dict[Tensor, np.ndarray] = {}
    for node in reversed(record.nodes[: loss.node.index + 1]):
        g = node_grads.pop(node, None)
        if g is None:
            continue
        for tensor, input_grad in zip(node.inputs, node.backward_fn(g)):
            if input_grad is None or not tensor.tracked:
                continue
            if tensor.node is not None and tensor.node.alive:
                key, bucket = tensor.node, node_grads
            else:
                key, bucket = tensor, leaf_grads
            bucket[key] = bucket[key] + input_grad if key in bucket else input_grad

    for leaf, g in leaf_grads.items():
        leaf.grad = g if leaf.grad is None else leaf.grad + g
    return leaf_grads
