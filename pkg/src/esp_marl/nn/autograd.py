"""A small reverse-mode autodiff over numpy arrays.

Each :class:`Tensor` remembers its parents and a closure that pushes the
upstream gradient back to them. ``backward`` walks the graph in reverse
topological order. Only the operations the trainers need are provided.
"""

from __future__ import annotations

import numpy as np

from esp_marl.errors import InvalidArgument


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def as_tensor(x) -> "Tensor":
    return x if isinstance(x, Tensor) else Tensor(x)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    # -- bookkeeping ---------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        return f"Tensor({self.data!r}, requires_grad={self.requires_grad})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def backward(self):
        if self.data.size != 1:
            raise InvalidArgument(f"backward needs a scalar loss, got shape {self.data.shape}")
        order, seen = [], set()
        stack = [(self, False)]
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
                if id(p) not in seen:
                    stack.append((p, False))
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        na, nb = self.requires_grad, other.requires_grad
        return Tensor(self.data + other.data, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g, a) if na else None,
                                           _unbroadcast(g, b) if nb else None))

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, _parents=(self,), _backward=lambda g: (-g,))

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self.shape, other.shape
        na, nb = self.requires_grad, other.requires_grad
        return Tensor(self.data - other.data, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g, a) if na else None,
                                           _unbroadcast(-g, b) if nb else None))

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        nx, ny = self.requires_grad, other.requires_grad
        return Tensor(x * y, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g * y, x.shape) if nx else None,
                                           _unbroadcast(g * x, y.shape) if ny else None))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        return Tensor(x / y, _parents=(self, other),
                      _backward=lambda g: (_unbroadcast(g / y, x.shape),
                                           _unbroadcast(-g * x / (y * y), y.shape)))

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, p):
        if isinstance(p, Tensor):
            raise InvalidArgument("only constant exponents are supported")
        x = self.data
        return Tensor(x ** p, _parents=(self,), _backward=lambda g: (g * p * x ** (p - 1),))

    def __matmul__(self, other):
        other = as_tensor(other)
        x, y = self.data, other.data
        need_x, need_y = self.requires_grad, other.requires_grad

        def back(g):
            gx = gy = None
            if y.ndim == 2 and x.ndim >= 2:
                # common dense-layer case: fold leading axes instead of broadcasting
                if need_x:
                    gx = g @ y.T
                if need_y:
                    gy = x.reshape(-1, x.shape[-1]).T @ g.reshape(-1, g.shape[-1])
                return gx, gy
            if need_x:
                gx = g @ np.swapaxes(y, -1, -2) if y.ndim > 1 else np.multiply.outer(g, y)
                gx = _unbroadcast(gx, x.shape)
            if need_y:
                gy = np.swapaxes(x, -1, -2) @ g if x.ndim > 1 else np.multiply.outer(x, g)
                gy = _unbroadcast(gy, y.shape)
            return gx, gy

        return Tensor(x @ y, _parents=(self, other), _backward=back)

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    @property
    def T(self):
        return Tensor(self.data.T, _parents=(self,), _backward=lambda g: (g.T,))

    # -- elementwise ---------------------------------------------------------
    def tanh(self):
        y = np.tanh(self.data)
        return Tensor(y, _parents=(self,), _backward=lambda g: (g * (1.0 - y * y),))

    def exp(self):
        y = np.exp(self.data)
        return Tensor(y, _parents=(self,), _backward=lambda g: (g * y,))

    def log(self):
        x = self.data
        return Tensor(np.log(x), _parents=(self,), _backward=lambda g: (g / x,))

    def clip(self, lo, hi):
        x = self.data
        inside = (x >= lo) & (x <= hi)
        return Tensor(np.clip(x, lo, hi), _parents=(self,), _backward=lambda g: (g * inside,))

    # -- reductions and shape ------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        shape = self.shape

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,), _backward=back)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod([self.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        old = self.shape
        return Tensor(self.data.reshape(*shape), _parents=(self,), _backward=lambda g: (g.reshape(old),))

    def __getitem__(self, idx):
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            np.add.at(out, idx, g)
            return (out,)

        return Tensor(self.data[idx], _parents=(self,), _backward=back)

    def gather(self, index):
        """Pick ``self[..., index[...]]`` along the last axis (index has the leading shape)."""
        idx = np.asarray(index)[..., None]
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            np.put_along_axis(out, idx, g[..., None], axis=-1)
            return (out,)

        return Tensor(np.take_along_axis(self.data, idx, axis=-1)[..., 0], _parents=(self,), _backward=back)

    def take(self, perm, axis=-1):
        """Permute/select along ``axis`` with an integer index array."""
        perm = np.asarray(perm)
        shape = self.shape

        def back(g):
            out = np.zeros(shape)
            moved = np.moveaxis(out, axis, 0)
            np.add.at(moved, perm, np.moveaxis(g, axis, 0))
            return (out,)

        return Tensor(np.take(self.data, perm, axis=axis), _parents=(self,), _backward=back)

    def log_softmax(self):
        x = self.data
        m = x.max(axis=-1, keepdims=True)
        lse = m + np.log(np.exp(x - m).sum(axis=-1, keepdims=True))
        y = x - lse
        p = np.exp(y)
        return Tensor(y, _parents=(self,), _backward=lambda g: (g - p * g.sum(axis=-1, keepdims=True),))


def minimum(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data <= b.data
    return Tensor(np.minimum(a.data, b.data), _parents=(a, b),
                  _backward=lambda g: (_unbroadcast(g * pick_a, a.shape), _unbroadcast(g * ~pick_a, b.shape)))


def concatenate(tensors, axis=-1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g):
        return tuple(np.split(g, sizes, axis=axis))

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis), _parents=tuple(tensors), _backward=back)


def parameter(values) -> Tensor:
    return Tensor(np.array(values, dtype=np.float64, copy=True), requires_grad=True)
