"""Dense float64 tensors with reverse-mode automatic differentiation.

Every differentiable op builds a node that keeps references to its parents
and a closure mapping the output gradient to one gradient per parent.
``Tensor.backward`` walks the graph in reverse topological order and
accumulates gradients into leaf tensors that require them.
"""
from __future__ import annotations

from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..errors import DimensionError, UsageError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_grad_enabled = True


class no_grad:
    """Context manager that stops ops from recording the graph."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._parents: tuple = ()
        self._backward: Optional[BackwardFn] = None
        self._op = ""

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def T(self) -> "Tensor":
        return transpose(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operators ----------------------------------------------------------
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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return index(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes or None)

    # -- autodiff -------------------------------------------------------------
    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Populate ``.grad`` on every leaf reachable from this scalar."""
        if grad is None:
            if self.data.size != 1:
                raise UsageError(
                    f"backward() needs a scalar output, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        if not self.requires_grad:
            return

        order = _topological_order(self)
        grads = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def _topological_order(root: Tensor) -> list:
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


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: Iterable[Tensor], backward: BackwardFn, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._op = op
    parents = tuple(parents)
    out.requires_grad = _grad_enabled and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(op: str, a: Tensor, b: Tensor) -> tuple:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: cannot broadcast shapes {a.shape} and {b.shape}") from None


# -- elementwise arithmetic ---------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    return _result(
        a.data + b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    return _result(
        a.data - b.data, (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub",
    )


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    return _result(
        a.data * b.data, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("div", a, b)
    return _result(
        a.data / b.data, (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
        "div",
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _result(-a.data, (a,), lambda g: (-g,), "neg")


# -- linear algebra and shape ops -------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product of two 2-D tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return _result(
        a.data @ b.data, (a, b),
        lambda g: (g @ b.data.T, a.data.T @ g), "matmul",
    )


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise DimensionError(f"transpose: axes {axes} invalid for shape {a.shape}")
    inverse = tuple(np.argsort(axes))
    return _result(
        np.transpose(a.data, axes), (a,),
        lambda g: (np.transpose(g, inverse),), "transpose",
    )


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"reshape: cannot view {a.shape} as {tuple(shape)}") from None
    return _result(out, (a,), lambda g: (g.reshape(a.shape),), "reshape")


def index(a, idx) -> Tensor:
    """Basic or advanced numpy indexing; repeated indices accumulate gradient."""
    a = as_tensor(a)

    def backward(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _result(a.data[idx], (a,), backward, "index")


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(
            s != r for k, (s, r) in enumerate(zip(t.shape, ref)) if k != ax
        ):
            raise DimensionError(f"concat: incompatible shapes {ref} and {t.shape} on axis {axis}")
    bounds = np.cumsum([t.shape[ax] for t in tensors])[:-1]
    return _result(
        np.concatenate([t.data for t in tensors], axis=ax), tensors,
        lambda g: tuple(np.split(g, bounds, axis=ax)), "concat",
    )


# -- reductions ---------------------------------------------------------------

def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), backward, "sum")


def mean(a, axis=None, keepdims=False) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod([a.shape[k] for k in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / count)


# -- nonlinearities -----------------------------------------------------------

def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return _result(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    return _result(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return _result(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return _result(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    return _result(
        np.where(pos, a.data, slope * a.data), (a,),
        lambda g: (np.where(pos, g, slope * g),), "leaky_relu",
    )


def elu(a, alpha: float = 1.0) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    neg_part = alpha * np.expm1(np.minimum(a.data, 0.0))
    out = np.where(pos, a.data, neg_part)
    return _result(out, (a,), lambda g: (np.where(pos, g, g * (neg_part + alpha)),), "elu")


def _shifted(x: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return x - m


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    e = np.exp(_shifted(a.data, axis))
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _result(out, (a,), backward, "softmax")


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    z = _shifted(a.data, axis)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def backward(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _result(out, (a,), backward, "log_softmax")


def masked_fill(a, mask: np.ndarray, value: float) -> Tensor:
    a = as_tensor(a)
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), a.shape)
    return _result(
        np.where(mask, value, a.data), (a,),
        lambda g: (np.where(mask, 0.0, g),), "masked_fill",
    )


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    n = x.shape[-1]

    def backward(g):
        gx = g * gain.data
        dx = inv * (gx - gx.mean(axis=-1, keepdims=True)
                    - xhat * (gx * xhat).sum(axis=-1, keepdims=True) / n)
        return (dx, _unbroadcast(g * xhat, gain.shape), _unbroadcast(g, bias.shape))

    return _result(xhat * gain.data + bias.data, (x, gain, bias), backward, "layer_norm")


# -- non-differentiable helpers -------------------------------------------

def argmax(a, axis: int = -1) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest index. Carries no gradient."""
    return np.argmax(as_tensor(a).data, axis=axis)


def one_hot(indices, n: int) -> Tensor:
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros(indices.shape + (n,))
    np.put_along_axis(out, indices[..., None], 1.0, axis=-1)
    return Tensor(out)


# -- recurrent cell -------------------------------------------------------------

def lstm(x, w_ih, w_hh, b, reverse: bool = False) -> Tensor:
    """Run a single-direction LSTM over the rows of ``x``.

    Gate layout in the 4h columns is input, forget, candidate, output.
    Returns the (T, h) hidden-state sequence aligned with the input rows.
    """
    x, w_ih, w_hh, b = (as_tensor(t) for t in (x, w_ih, w_hh, b))
    T, d_in = x.shape
    if w_ih.shape[0] != d_in or w_ih.shape[1] % 4 or w_hh.shape != (w_ih.shape[1] // 4, w_ih.shape[1]):
        raise DimensionError(
            f"lstm: input {x.shape} incompatible with weights {w_ih.shape}, {w_hh.shape}"
        )
    h = w_hh.shape[0]
    steps = range(T - 1, -1, -1) if reverse else range(T)
    xz = x.data @ w_ih.data + b.data
    H = np.zeros((T, h))
    C = np.zeros((T, h))
    gates = np.zeros((T, 4 * h))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    prev_of = {}
    last = None
    for t in steps:
        z = xz[t] + h_prev @ w_hh.data
        i = _sigmoid(z[:h])
        f = _sigmoid(z[h:2 * h])
        gc = np.tanh(z[2 * h:3 * h])
        o = _sigmoid(z[3 * h:])
        c = f * c_prev + i * gc
        gates[t] = np.concatenate([i, f, gc, o])
        C[t] = c
        H[t] = o * np.tanh(c)
        prev_of[t] = last
        last = t
        h_prev, c_prev = H[t], c

    def backward(g):
        dxz = np.zeros((T, 4 * h))
        dw_hh = np.zeros_like(w_hh.data)
        dh_next = np.zeros(h)
        dc_next = np.zeros(h)
        for t in reversed(list(steps)):
            p = prev_of[t]
            hp = H[p] if p is not None else np.zeros(h)
            cp = C[p] if p is not None else np.zeros(h)
            i, f, gc, o = np.split(gates[t], 4)
            tc = np.tanh(C[t])
            dh = g[t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz = np.concatenate([
                dc * gc * i * (1.0 - i),
                dc * cp * f * (1.0 - f),
                dc * i * (1.0 - gc * gc),
                dh * tc * o * (1.0 - o),
            ])
            dxz[t] = dz
            dw_hh += np.outer(hp, dz)
            dh_next = w_hh.data @ dz
            dc_next = dc * f
        return (dxz @ w_ih.data.T, x.data.T @ dxz, dw_hh, _unbroadcast(dxz, b.shape))

    return _result(H, (x, w_ih, w_hh, b), backward, "lstm")
