"""Define-by-run reverse-mode autodiff over float64 numpy arrays.

Every primitive returns a new :class:`Tensor` holding references to its
parents and a closure that maps the output gradient to parent gradients.
:func:`backward` orders the recorded graph topologically (the tape) and
walks it once in reverse. Broadcasting follows numpy; gradients are summed
back to each parent's shape.
"""

from __future__ import annotations

import numpy as np

from ..sparse import spmm
from . import special


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, value, requires_grad=False, name=None, _parents=(), _backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __len__(self):
        return len(self.value)

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        return float(self.value)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    lead = grad.ndim - len(shape)
    if lead:
        grad = grad.sum(axis=tuple(range(lead)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _make(value, parents, backward):
    parents = tuple(parents)
    if any(p.requires_grad for p in parents):
        return Tensor(value, requires_grad=True, _parents=parents, _backward=backward)
    return Tensor(value)


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# elementwise binary -----------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    return _make(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    return _make(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    return _make(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    out = a.value / b.value
    return _make(
        out,
        (a, b),
        lambda g: (_unbroadcast(g / b.value, a.shape), _unbroadcast(-g * out / b.value, b.shape)),
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.value, (a,), lambda g: (-g,))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return _make(a.value @ b.value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))


# elementwise unary ------------------------------------------------------


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.value)
    return _make(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.value <= 0):
        raise ValueError("log of non-positive value")
    return _make(np.log(a.value), (a,), lambda g: (g / a.value,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.value < 0):
        raise ValueError("sqrt of negative value")
    out = np.sqrt(a.value)
    return _make(out, (a,), lambda g: (0.5 * g / out,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.value > 0
    return _make(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def softplus(a) -> Tensor:
    a = as_tensor(a)
    x = a.value
    out = np.logaddexp(0.0, x)
    sig = np.exp(x - out)
    return _make(out, (a,), lambda g: (g * sig,))


def clip_max(a, upper: float) -> Tensor:
    """``min(a, upper)``; gradient zero where clipped."""
    a = as_tensor(a)
    mask = a.value < upper
    return _make(np.minimum(a.value, upper), (a,), lambda g: (g * mask,))


def lgamma(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.value <= 0):
        raise ValueError("lgamma of non-positive value")
    return _make(special.lgamma(a.value), (a,), lambda g: (g * special.digamma(a.value),))


def digamma(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.value <= 0):
        raise ValueError("digamma of non-positive value")
    return _make(special.digamma(a.value), (a,), lambda g: (g * special.trigamma(a.value),))


# reductions and reshaping ---------------------------------------------------


def _expand(g, shape, axis, keepdims):
    if axis is not None and not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    return _make(
        a.value.sum(axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims),),
    )


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return _make(
        a.value.mean(axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_expand(g, a.shape, axis, keepdims) / count,),
    )


def logsumexp(a, axis=-1, keepdims=False) -> Tensor:
    a = as_tensor(a)
    peak = a.value.max(axis=axis, keepdims=True)
    shifted = np.exp(a.value - peak)
    total = shifted.sum(axis=axis, keepdims=True)
    out = np.log(total) + peak
    soft = shifted / total
    if not keepdims:
        out = np.squeeze(out, axis=axis)
    return _make(out, (a,), lambda g: (_expand(g, a.shape, axis, keepdims) * soft,))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _make(a.value.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def getitem(a, index) -> Tensor:
    """Basic (slice/int) indexing."""
    a = as_tensor(a)

    def back(g):
        out = np.zeros_like(a.value)
        out[index] = g
        return (out,)

    return _make(a.value[index], (a,), back)


def index_select(a, index, axis=0) -> Tensor:
    """Gather along ``axis`` with an integer index array (repeats allowed)."""
    a = as_tensor(a)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= a.shape[axis]):
        raise ValueError("index_select: index out of range")

    def back(g):
        out = np.zeros_like(a.value)
        np.add.at(np.moveaxis(out, axis, 0), index, np.moveaxis(g, axis, 0))
        return (out,)

    return _make(np.take(a.value, index, axis=axis), (a,), back)


def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    try:
        value = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError as exc:
        raise ValueError(f"concat: {exc}") from None
    return _make(value, tensors, lambda g: tuple(np.split(g, sizes, axis=axis)))


def sparse_matmul(matrix, a) -> Tensor:
    """Constant sparse matrix times a 2-D tensor."""
    a = as_tensor(a)
    if a.ndim != 2 or matrix.n_cols != a.shape[0]:
        raise ValueError(f"sparse_matmul: incompatible shapes {matrix.shape} and {a.shape}")
    cache = {}

    def back(g):
        if "t" not in cache:
            cache["t"] = matrix.transpose()
        return (spmm(cache["t"], g),)

    return _make(spmm(matrix, a.value), (a,), back)


# backward ---------------------------------------------------------------


def _topological(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor):
    """Populate ``.grad`` of every leaf that requires grad with d(root)/d(leaf).

    Leaf gradients accumulate across calls until :meth:`Tensor.zero_grad`.
    """
    if root.value.size != 1:
        raise ValueError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return
    grads = {id(root): np.ones_like(root.value)}
    for node in reversed(_topological(root)):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            pg = np.asarray(pg, dtype=np.float64)
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
