"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps a numpy array and records the operation that produced it
(define-by-run tape). ``backward(loss)`` walks the tape once in reverse
topological order and accumulates gradients into every tensor that has
``requires_grad`` set. Gradients accumulate additively across calls;
``zero_grad`` resets them explicitly.

All arithmetic is float64. Every op checks its output for NaN/Inf and fails
fast, naming the op, rather than letting bad values propagate.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

from .errors import ContractError, DimensionError, DomainError, NumericError

__all__ = [
    "Tensor",
    "backward",
    "zero_grad",
    "no_grad",
    "matmul",
    "exp",
    "log",
    "tanh",
    "sigmoid",
    "square",
    "sqrt",
    "softplus",
    "softmax",
    "logsumexp",
    "tsum",
    "tmean",
    "reshape",
    "swapaxes",
    "concat",
    "stack",
    "zeros",
    "constant",
]


def _finite_or_raise(arr: np.ndarray, op: str) -> None:
    # a single reduction: any NaN/inf in the array makes the sum non-finite
    if not math.isfinite(arr.sum()):
        raise NumericError(f"non-finite values produced by op '{op}'")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to ``shape`` after numpy broadcasting."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """Node of the computation graph.

    ``data`` is always a float64 ndarray. Leaf tensors created by the user may
    set ``requires_grad``; interior nodes inherit it from their parents.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, _op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = _backward
        self._op = _op
        if _op == "leaf":
            _finite_or_raise(self.data, "leaf")

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        """Constant copy cut off from the tape."""
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, op={self._op}, requires_grad={self.requires_grad})"

    # -- operator sugar ----------------------------------------------------

    def __add__(self, other):
        return _binary("add", self, _lift(other))

    def __radd__(self, other):
        return _binary("add", _lift(other), self)

    def __sub__(self, other):
        return _binary("sub", self, _lift(other))

    def __rsub__(self, other):
        return _binary("sub", _lift(other), self)

    def __mul__(self, other):
        return _binary("mul", self, _lift(other))

    def __rmul__(self, other):
        return _binary("mul", _lift(other), self)

    def __truediv__(self, other):
        return _binary("div", self, _lift(other))

    def __rtruediv__(self, other):
        return _binary("div", _lift(other), self)

    def __neg__(self):
        out = _node(-self.data, "neg", (self,))
        out._backward = lambda g: (-g,)
        return out

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise ContractError("exponent must be a python number")
        base = self.data
        out = _node(base**p, "pow", (self,))
        out._backward = lambda g: (g * p * base ** (p - 1),)
        return out

    def __getitem__(self, idx):
        out = _node(self.data[idx], "getitem", (self,))
        src_shape = self.data.shape

        def bwd(g):
            full = np.zeros(src_shape)
            np.add.at(full, idx, g)
            return (full,)

        out._backward = bwd
        return out

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])


def _lift(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def constant(x) -> Tensor:
    return _lift(x)


def zeros(*shape) -> Tensor:
    return Tensor(np.zeros(shape))


_grad_enabled = True


@contextmanager
def no_grad():
    """Suspend tape recording; ops inside produce constants."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _node(data: np.ndarray, op: str, parents) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=np.float64)
    out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
    out.grad = None
    out._parents = parents if _grad_enabled else ()
    out._backward = None
    out._op = op
    _finite_or_raise(out.data, op)
    return out


def _binary(kind: str, a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if kind == "div" and np.any(bd == 0.0):
        raise DomainError("division by zero")
    try:
        if kind == "add":
            data = ad + bd
        elif kind == "sub":
            data = ad - bd
        elif kind == "mul":
            data = ad * bd
        else:
            data = ad / bd
    except ValueError:
        raise DimensionError(f"{kind}: incompatible shapes {ad.shape} and {bd.shape}") from None
    out = _node(data, kind, (a, b))
    if kind == "add":
        out._backward = lambda g: (_unbroadcast(g, ad.shape), _unbroadcast(g, bd.shape))
    elif kind == "sub":
        out._backward = lambda g: (_unbroadcast(g, ad.shape), _unbroadcast(-g, bd.shape))
    elif kind == "mul":
        out._backward = lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape))
    else:
        out._backward = lambda g: (
            _unbroadcast(g / bd, ad.shape),
            _unbroadcast(-g * ad / (bd * bd), bd.shape),
        )
    return out


# -- linear algebra --------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs matrices, got shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul: inner dimensions disagree, {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    out = _node(ad @ bd, "matmul", (a, b))

    def bwd(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return _unbroadcast(ga, ad.shape), _unbroadcast(gb, bd.shape)

    out._backward = bwd
    return out


# -- elementwise unary -----------------------------------------------------


def exp(x: Tensor) -> Tensor:
    x = _lift(x)
    with np.errstate(over="ignore"):
        data = np.exp(x.data)
    out = _node(data, "exp", (x,))
    out._backward = lambda g: (g * data,)
    return out


def log(x: Tensor) -> Tensor:
    x = _lift(x)
    if np.any(x.data <= 0.0):
        raise DomainError("log of a non-positive value")
    out = _node(np.log(x.data), "log", (x,))
    out._backward = lambda g: (g / x.data,)
    return out


def tanh(x: Tensor) -> Tensor:
    x = _lift(x)
    data = np.tanh(x.data)
    out = _node(data, "tanh", (x,))
    out._backward = lambda g: (g * (1.0 - data * data),)
    return out


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    # overflow-free evaluation via the tanh identity
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(x: Tensor) -> Tensor:
    x = _lift(x)
    data = _sigmoid_np(x.data)
    out = _node(data, "sigmoid", (x,))
    out._backward = lambda g: (g * data * (1.0 - data),)
    return out


def square(x: Tensor) -> Tensor:
    x = _lift(x)
    out = _node(x.data * x.data, "square", (x,))
    out._backward = lambda g: (2.0 * g * x.data,)
    return out


def sqrt(x: Tensor) -> Tensor:
    x = _lift(x)
    if np.any(x.data < 0.0):
        raise DomainError("sqrt of a negative value")
    data = np.sqrt(x.data)
    out = _node(data, "sqrt", (x,))
    out._backward = lambda g: (g / (2.0 * data),)
    return out


def softplus(x: Tensor) -> Tensor:
    x = _lift(x)
    data = np.logaddexp(0.0, x.data)
    out = _node(data, "softplus", (x,))
    out._backward = lambda g: (g * _sigmoid_np(x.data),)
    return out


# -- reductions and normalizers ---------------------------------------------


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = _lift(x)
    if x.size == 0 or x.shape[axis] == 0:
        raise DimensionError("softmax over an empty axis")
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)
    out = _node(data, "softmax", (x,))

    def bwd(g):
        inner = (g * data).sum(axis=axis, keepdims=True)
        return ((g - inner) * data,)

    out._backward = bwd
    return out


def logsumexp(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    x = _lift(x)
    if x.size == 0 or x.shape[axis] == 0:
        raise DimensionError("logsumexp over an empty axis")
    m = x.data.max(axis=axis, keepdims=True)
    e = np.exp(x.data - m)
    s = e.sum(axis=axis, keepdims=True)
    data = m + np.log(s)
    soft = e / s
    if not keepdims:
        data = np.squeeze(data, axis=axis)
    out = _node(data, "logsumexp", (x,))

    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axis=axis)
        return (g * soft,)

    out._backward = bwd
    return out


def tsum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _lift(x)
    data = x.data.sum(axis=axis, keepdims=keepdims)
    out = _node(data, "sum", (x,))

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, x.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis=axis)
        return (np.broadcast_to(g, x.data.shape).copy(),)

    out._backward = bwd
    return out


def tmean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    x = _lift(x)
    n = x.data.size if axis is None else x.data.shape[axis]
    return tsum(x, axis=axis, keepdims=keepdims) * (1.0 / n)


# -- shape surgery -----------------------------------------------------------


def reshape(x: Tensor, shape) -> Tensor:
    x = _lift(x)
    src = x.data.shape
    out = _node(x.data.reshape(shape), "reshape", (x,))
    out._backward = lambda g: (g.reshape(src),)
    return out


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    x = _lift(x)
    out = _node(np.swapaxes(x.data, a, b), "swapaxes", (x,))
    out._backward = lambda g: (np.swapaxes(g, a, b),)
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    if not tensors:
        raise DimensionError("concat of an empty list")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = _node(data, "concat", tuple(tensors))
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]
    out._backward = lambda g: tuple(np.split(g, splits, axis=axis))
    return out


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    if not tensors:
        raise DimensionError("stack of an empty list")
    data = np.stack([t.data for t in tensors], axis=axis)
    out = _node(data, "stack", tuple(tensors))

    def bwd(g):
        moved = np.moveaxis(g, axis, 0)
        return tuple(moved[i] for i in range(len(tensors)))

    out._backward = bwd
    return out


# -- the backward pass -------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Accumulate dL/dt into ``t.grad`` for every tensor reachable from loss."""
    if loss.data.size != 1:
        raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack_ = [(loss, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if id(p) not in seen and (p.requires_grad or p._parents):
                stack_.append((p, False))

    flowing: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = flowing.pop(id(node), None)
        if g is None:
            continue
        if node.requires_grad:
            node.grad = g.copy() if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        parent_grads = node._backward(g)
        for parent, pg in zip(node._parents, parent_grads):
            if pg is None:
                continue
            if not math.isfinite(pg.sum()):
                raise NumericError(f"non-finite gradient at op '{node._op}'")
            key = id(parent)
            if key in flowing:
                flowing[key] = flowing[key] + pg
            else:
                flowing[key] = pg


def zero_grad(params) -> None:
    for p in params:
        p.zero_grad()
