"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Tensor` wraps a float64 ndarray and records the operations that
produced it. Calling :func:`backward` on a scalar output accumulates
gradients into every reachable leaf with ``requires_grad=True``.

The op set is deliberately small: affine arithmetic, matmul (with numpy
broadcasting), reductions, exp/log/sqrt, sigmoid, indexing, concatenation
and segment sums. Everything the model needs (SiLU, softmax, vector-neuron
layers, RBF expansion) is composed from these.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    """Node in the computation tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, _parents=(), _backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad = None
        self._parents = _parents if self.requires_grad else ()
        self._backward_fn = _backward_fn if self.requires_grad else None

    # -- basic introspection -------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self):
        return Tensor(self.data.copy())

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        out_data = self.data + other.data

        def bw(g):
            return (_unbroadcast(g, self.data.shape),
                    _unbroadcast(g, other.data.shape))

        return Tensor(out_data, _parents=(self, other), _backward_fn=bw)

    __radd__ = __add__

    def __neg__(self):
        return Tensor(-self.data, _parents=(self,), _backward_fn=lambda g: (-g,))

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        out_data = self.data * other.data

        def bw(g):
            return (_unbroadcast(g * other.data, self.data.shape),
                    _unbroadcast(g * self.data, other.data.shape))

        return Tensor(out_data, _parents=(self, other), _backward_fn=bw)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        out_data = self.data / other.data

        def bw(g):
            ga = _unbroadcast(g / other.data, self.data.shape)
            gb = _unbroadcast(-g * self.data / other.data ** 2, other.data.shape)
            return ga, gb

        return Tensor(out_data, _parents=(self, other), _backward_fn=bw)

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, p):
        if not np.isscalar(p):
            raise TypeError("only scalar exponents are supported")
        out_data = self.data ** p

        def bw(g):
            return (g * p * self.data ** (p - 1),)

        return Tensor(out_data, _parents=(self,), _backward_fn=bw)

    def __matmul__(self, other):
        other = as_tensor(other)
        out_data = np.matmul(self.data, other.data)

        def bw(g):
            ga = _unbroadcast(np.matmul(g, np.swapaxes(other.data, -1, -2)),
                              self.data.shape)
            gb = _unbroadcast(np.matmul(np.swapaxes(self.data, -1, -2), g),
                              other.data.shape)
            return ga, gb

        return Tensor(out_data, _parents=(self, other), _backward_fn=bw)

    # -- shape ops -----------------------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        out_data = self.data.reshape(shape)
        src_shape = self.data.shape
        return Tensor(out_data, _parents=(self,),
                      _backward_fn=lambda g: (g.reshape(src_shape),))

    def swapaxes(self, a, b):
        return Tensor(np.swapaxes(self.data, a, b), _parents=(self,),
                      _backward_fn=lambda g: (np.swapaxes(g, a, b),))

    @property
    def T(self):
        if self.data.ndim != 2:
            raise ValueError("T only defined for 2-D tensors")
        return self.swapaxes(0, 1)

    def __getitem__(self, idx):
        out_data = self.data[idx]
        src_shape = self.data.shape

        def bw(g):
            acc = np.zeros(src_shape)
            np.add.at(acc, idx, g)
            return (acc,)

        return Tensor(out_data, _parents=(self,), _backward_fn=bw)

    # -- reductions ----------------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        src_shape = self.data.shape

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, src_shape).copy(),)

        return Tensor(out_data, _parents=(self,), _backward_fn=bw)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in np.atleast_1d(axis)])
        return self.sum(axis=axis, keepdims=keepdims) / float(n)

    # -- elementwise ---------------------------------------------------------
    def exp(self):
        out_data = np.exp(self.data)
        return Tensor(out_data, _parents=(self,),
                      _backward_fn=lambda g: (g * out_data,))

    def log(self):
        return Tensor(np.log(self.data), _parents=(self,),
                      _backward_fn=lambda g: (g / self.data,))

    def sqrt(self):
        out_data = np.sqrt(self.data)
        return Tensor(out_data, _parents=(self,),
                      _backward_fn=lambda g: (g / (2.0 * out_data),))

    def sigmoid(self):
        # evaluate exp on the non-positive branch only, so huge |x| can't overflow
        x = self.data
        e = np.exp(-np.abs(x))
        out_data = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return Tensor(out_data, _parents=(self,),
                      _backward_fn=lambda g: (g * out_data * (1.0 - out_data),))

    def silu(self):
        return self * self.sigmoid()

    def clip(self, lo, hi):
        out_data = np.clip(self.data, lo, hi)
        mask = (self.data > lo) & (self.data < hi)
        return Tensor(out_data, _parents=(self,),
                      _backward_fn=lambda g: (g * mask,))

    def backward(self):
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- free functions ----------------------------------------------------------

def concat(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor(out_data, _parents=tuple(tensors), _backward_fn=bw)


def stack(tensors, axis=0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0)[i] for i in range(len(tensors)))

    return Tensor(out_data, _parents=tuple(tensors), _backward_fn=bw)


def segment_sum(t: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Sum rows of ``t`` into ``num_segments`` buckets given by ``segment_ids``."""
    t = as_tensor(t)
    segment_ids = np.asarray(segment_ids, dtype=np.intp)
    out_data = np.zeros((num_segments,) + t.data.shape[1:])
    np.add.at(out_data, segment_ids, t.data)
    return Tensor(out_data, _parents=(t,),
                  _backward_fn=lambda g: (g[segment_ids],))


def softmax(t: Tensor, axis=-1) -> Tensor:
    t = as_tensor(t)
    shifted = t - Tensor(t.data.max(axis=axis, keepdims=True))
    e = shifted.exp()
    return e / e.sum(axis=axis, keepdims=True)


def backward(out: Tensor) -> None:
    """Reverse-mode accumulation from a scalar output.

    Gradients accumulate into ``.grad`` of every reachable leaf tensor with
    ``requires_grad=True``; repeated calls add up until the grads are reset.
    """
    if out.data.size != 1:
        raise ValueError("backward requires a scalar output")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack_ = [(out, False)]
    while stack_:
        node, processed = stack_.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            stack_.append((p, False))

    grads: dict[int, np.ndarray] = {id(out): np.ones_like(out.data)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward_fn is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        for parent, pg in zip(node._parents, node._backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg
