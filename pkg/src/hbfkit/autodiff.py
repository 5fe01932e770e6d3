"""Minimal reverse-mode automatic differentiation on numpy arrays.

A Tensor wraps an ndarray and remembers how it was produced; backward()
walks the graph in reverse topological order accumulating gradients.
Just enough ops for the precoder networks: broadcast arithmetic, batched
matmul, reductions, reshapes, slicing, exp/log/sqrt, and leaky ReLU.
"""

from __future__ import annotations

import numpy as np

LN2 = float(np.log(2.0))


class GradientNanError(FloatingPointError):
    """A backward pass produced a non-finite gradient."""

    def __init__(self, op: str):
        self.op = op
        super().__init__(f"non-finite gradient at node {op!r}")


class Tensor:
    __slots__ = ("data", "grad", "parents", "backward_fn", "op", "requires_grad")

    def __init__(self, data, parents=(), backward_fn=None, op="leaf",
                 requires_grad=True):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.parents = parents
        self.backward_fn = backward_fn
        self.op = op
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape})"

    def backward(self, check_finite: bool = True):
        if self.data.size != 1:
            raise ValueError("backward() expects a scalar loss")
        topo, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        for node in topo:
            node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node.backward_fn is None or node.grad is None:
                continue
            node.backward_fn(node.grad)
            if check_finite:
                for parent in node.parents:
                    if parent.grad is not None and \
                            not np.all(np.isfinite(parent.grad)):
                        raise GradientNanError(node.op)

    def accumulate(self, grad):
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64)
        else:
            self.grad += grad

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(constant(other), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(constant(other), self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)


def constant(value) -> Tensor:
    return Tensor(value, requires_grad=False)


def _as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else constant(value)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the original operand shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _binary(a, b, out, da, db, op):
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(grad):
        if a.requires_grad:
            a.accumulate(_unbroadcast(da(grad), a.data.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(db(grad), b.data.shape))

    return Tensor(out, parents=(a, b), backward_fn=backward, op=op)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return _binary(a, b, a.data + b.data, lambda g: g, lambda g: g, "add")


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return _binary(a, b, a.data - b.data, lambda g: g, lambda g: -g, "sub")


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return _binary(a, b, a.data * b.data,
                   lambda g: g * b.data, lambda g: g * a.data, "mul")


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    return _binary(a, b, a.data / b.data,
                   lambda g: g / b.data,
                   lambda g: -g * a.data / (b.data * b.data), "div")


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data @ b.data

    def backward(grad):
        if a.requires_grad:
            ga = grad @ np.swapaxes(b.data, -1, -2)
            a.accumulate(_unbroadcast(ga, a.data.shape))
        if b.requires_grad:
            gb = np.swapaxes(a.data, -1, -2) @ grad
            b.accumulate(_unbroadcast(gb, b.data.shape))

    return Tensor(out, parents=(a, b), backward_fn=backward, op="matmul")


def swapaxes(a, ax1, ax2):
    a = _as_tensor(a)

    def backward(grad):
        a.accumulate(np.swapaxes(grad, ax1, ax2))

    return Tensor(np.swapaxes(a.data, ax1, ax2), parents=(a,),
                  backward_fn=backward, op="swapaxes")


def reshape(a, shape):
    a = _as_tensor(a)
    original = a.data.shape

    def backward(grad):
        a.accumulate(grad.reshape(original))

    return Tensor(a.data.reshape(shape), parents=(a,), backward_fn=backward,
                  op="reshape")


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)

    def backward(grad):
        if axis is not None and not keepdims:
            grad = np.expand_dims(grad, axis)
        a.accumulate(np.broadcast_to(grad, a.data.shape).copy())

    return Tensor(a.data.sum(axis=axis, keepdims=keepdims), parents=(a,),
                  backward_fn=backward, op="sum")


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def exp(a):
    a = _as_tensor(a)
    out = np.exp(a.data)

    def backward(grad):
        a.accumulate(grad * out)

    return Tensor(out, parents=(a,), backward_fn=backward, op="exp")


def log(a):
    a = _as_tensor(a)

    def backward(grad):
        a.accumulate(grad / a.data)

    return Tensor(np.log(a.data), parents=(a,), backward_fn=backward, op="log")


def log2(a):
    return mul(log(a), 1.0 / LN2)


def sqrt(a):
    a = _as_tensor(a)
    out = np.sqrt(a.data)

    def backward(grad):
        a.accumulate(grad * 0.5 / out)

    return Tensor(out, parents=(a,), backward_fn=backward, op="sqrt")


def leaky_relu(a, slope=0.01):
    a = _as_tensor(a)
    # derivative at exactly zero takes the negative-side slope
    factor = np.where(a.data > 0.0, 1.0, slope)

    def backward(grad):
        a.accumulate(grad * factor)

    return Tensor(np.where(a.data > 0.0, a.data, slope * a.data),
                  parents=(a,), backward_fn=backward, op="leaky_relu")


def take(a, index):
    a = _as_tensor(a)

    def backward(grad):
        full = np.zeros_like(a.data)
        np.add.at(full, index, grad)
        a.accumulate(full)

    return Tensor(a.data[index], parents=(a,), backward_fn=backward, op="take")


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(grad):
        for t, piece in zip(tensors, np.split(grad, splits, axis=axis)):
            if t.requires_grad:
                t.accumulate(piece)

    return Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                  parents=tuple(tensors), backward_fn=backward, op="concat")


def softmax(a, axis=-1):
    """Numerically stable softmax; shift-invariance keeps gradients exact."""
    a = _as_tensor(a)
    shifted = sub(a, constant(a.data.max(axis=axis, keepdims=True)))
    e = exp(shifted)
    return div(e, tsum(e, axis=axis, keepdims=True))


def grad_check(build_loss, leaves, step=1e-5, max_coords=None, rng=None):
    """Max relative error between autodiff and central finite differences.

    ``build_loss()`` must rebuild the scalar loss from the current leaf
    data. With ``max_coords`` set, a random coordinate subset per leaf is
    probed (seeded by ``rng``).
    """
    loss = build_loss()
    loss.backward()
    grads = [np.array(leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data))
             for leaf in leaves]
    worst = 0.0
    for leaf, grad in zip(leaves, grads):
        size = leaf.data.size
        coords = range(size)
        if max_coords is not None and size > max_coords:
            coords = (rng or np.random.default_rng(0)).choice(
                size, size=max_coords, replace=False)
        for i in coords:
            keep = leaf.data.flat[i]
            leaf.data.flat[i] = keep + step
            up = float(build_loss().data)
            leaf.data.flat[i] = keep - step
            down = float(build_loss().data)
            leaf.data.flat[i] = keep
            numeric = (up - down) / (2.0 * step)
            analytic = grad.flat[i]
            denom = max(abs(numeric), abs(analytic))
            if denom > 1e-8:
                worst = max(worst, abs(numeric - analytic) / denom)
    return worst
