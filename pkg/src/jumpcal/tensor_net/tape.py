"""Array-valued reverse-mode differentiation.

A :class:`Tape` records every primitive applied to :class:`Node` values
together with a vector-Jacobian product (VJP) closure.  Replaying the
records backwards from an output accumulates the gradient of that output
with respect to every recorded node.

All primitives also accept plain numpy arrays.  When no argument is a
``Node`` the primitive just computes the value, so model code can be
written once and run with or without a tape.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyTape


class Node:
    __slots__ = ("value", "tape", "index", "parents")
    __array_priority__ = 1000

    def __init__(self, value, tape, parents=()):
        self.value = value
        self.tape = tape
        self.parents = parents  # tuple of (Node, vjp)
        self.index = len(tape.nodes)
        tape.nodes.append(self)

    @property
    def shape(self):
        return np.shape(self.value)

    def __repr__(self):
        return f"Node(#{self.index}, shape={self.shape})"

    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __truediv__(self, o): return div(self, o)
    def __rtruediv__(self, o): return div(o, self)
    def __neg__(self): return neg(self)
    def __matmul__(self, o): return matmul(self, o)
    def __rmatmul__(self, o): return matmul(o, self)
    def __getitem__(self, idx): return getitem(self, idx)


class Tape:
    def __init__(self):
        self.nodes: list[Node] = []

    def __len__(self):
        return len(self.nodes)

    def variable(self, value) -> Node:
        return Node(np.asarray(value, dtype=float), self)

    def backward(self, output: Node, seed=1.0) -> list:
        """Gradients of ``output`` (weighted by ``seed``) w.r.t. every node.

        Returns a list indexed by ``Node.index``; entries are ``None`` where
        the output does not depend on the node.
        """
        if not self.nodes:
            raise EmptyTape("nothing recorded on tape")
        if output.tape is not self:
            raise ValueError("output node belongs to a different tape")
        grads: list = [None] * len(self.nodes)
        grads[output.index] = np.broadcast_to(np.asarray(seed, dtype=float), output.shape).copy()
        for i in range(output.index, -1, -1):
            g = grads[i]
            if g is None:
                continue
            node = self.nodes[i]
            for parent, vjp in node.parents:
                contrib = vjp(g)
                if grads[parent.index] is None:
                    grads[parent.index] = contrib
                else:
                    grads[parent.index] = grads[parent.index] + contrib
            if node.parents:
                grads[i] = None  # interior gradients are not kept
        return grads

    def clear(self):
        """Drop every recorded node; breaks the node/tape reference cycle."""
        self.nodes = []

    def grad(self, output: Node, wrt, seed=1.0):
        """Gradients of ``output`` with respect to the given leaf nodes."""
        grads = self.backward(output, seed)
        out = []
        for n in wrt:
            g = grads[n.index]
            out.append(np.zeros(n.shape) if g is None else g)
        return out


def value(x):
    return x.value if isinstance(x, Node) else x


def tape_of(*args):
    for a in args:
        if isinstance(a, Node):
            return a.tape
    return None


def unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if np.shape(g) == tuple(shape):
        return g
    ndiff = np.ndim(g) - len(shape)
    if ndiff > 0:
        g = g.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def record(val, tape, *links):
    """Record ``val`` with ``(parent, vjp)`` links; plain value if nothing to track."""
    parents = tuple((p, f) for p, f in links if isinstance(p, Node))
    if tape is None or not parents:
        return val
    return Node(val, tape, parents)


_record = record


def add(a, b):
    va, vb = value(a), value(b)
    out = va + vb
    sa, sb = np.shape(va), np.shape(vb)
    return _record(out, tape_of(a, b),
                   (a, lambda g: unbroadcast(g, sa)),
                   (b, lambda g: unbroadcast(g, sb)))


def sub(a, b):
    va, vb = value(a), value(b)
    out = va - vb
    sa, sb = np.shape(va), np.shape(vb)
    return _record(out, tape_of(a, b),
                   (a, lambda g: unbroadcast(g, sa)),
                   (b, lambda g: unbroadcast(-g, sb)))


def mul(a, b):
    va, vb = value(a), value(b)
    out = va * vb
    sa, sb = np.shape(va), np.shape(vb)
    return _record(out, tape_of(a, b),
                   (a, lambda g: unbroadcast(g * vb, sa)),
                   (b, lambda g: unbroadcast(g * va, sb)))


def div(a, b):
    va, vb = value(a), value(b)
    out = va / vb
    sa, sb = np.shape(va), np.shape(vb)
    return _record(out, tape_of(a, b),
                   (a, lambda g: unbroadcast(g / vb, sa)),
                   (b, lambda g: unbroadcast(-g * out / vb, sb)))


def neg(a):
    return _record(-value(a), tape_of(a), (a, lambda g: -g))


def matmul(a, b):
    """``a @ b`` with numpy batching rules for stacks of matrices."""
    va, vb = value(a), value(b)
    out = va @ vb
    sa, sb = np.shape(va), np.shape(vb)

    def ga(g):
        return unbroadcast(g @ np.swapaxes(vb, -1, -2), sa)

    def gb(g):
        return unbroadcast(np.swapaxes(va, -1, -2) @ g, sb)

    return _record(out, tape_of(a, b), (a, ga), (b, gb))


def _act_inplace(z, name):
    if name == "tanh":
        np.tanh(z, out=z)
    elif name == "relu":
        np.maximum(z, 0.0, out=z)
    elif name == "softplus":
        np.logaddexp(0.0, z, out=z)
    elif name != "identity":
        raise ValueError(f"unknown activation {name!r}")
    return z


def _act_slope(y, name):
    """Activation derivative expressed through the activation output ``y``."""
    if name == "tanh":
        d = y * y
        np.subtract(1.0, d, out=d)
        return d
    if name == "relu":
        return (y > 0).astype(float)
    if name == "softplus":
        d = np.negative(y)
        np.exp(d, out=d)
        np.subtract(1.0, d, out=d)  # sigmoid(x) = 1 - exp(-softplus(x))
        return d
    return np.ones_like(y)


def dense(x, w, b, activation="identity"):
    """Fused ``activation(x @ w + b)``: one tape node and no intermediates."""
    vx, vw, vb = value(x), value(w), value(b)
    out = vx @ vw
    out += vb
    _act_inplace(out, activation)
    sx, sw, sb = np.shape(vx), np.shape(vw), np.shape(vb)
    cache = []

    def delta(g):
        # the three vjps share dL/dz; compute it once per backward pass
        if not cache or cache[0][0] is not g:
            d = _act_slope(out, activation)
            d *= g
            cache[:] = [(g, d)]
        return cache[0][1]

    return _record(out, tape_of(x, w, b),
                   (x, lambda g: unbroadcast(delta(g) @ np.swapaxes(vw, -1, -2), sx)),
                   (w, lambda g: unbroadcast(np.swapaxes(vx, -1, -2) @ delta(g), sw)),
                   (b, lambda g: unbroadcast(delta(g), sb)))


def tanh(a):
    out = np.tanh(value(a))
    return _record(out, tape_of(a), (a, lambda g: g * (1.0 - out * out)))


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    # exp of a non-positive argument only, so no overflow
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softplus(a):
    va = value(a)
    return _record(_softplus(va), tape_of(a), (a, lambda g: g * _sigmoid(va)))


def identity(a):
    return a


def exp(a):
    out = np.exp(value(a))
    return _record(out, tape_of(a), (a, lambda g: g * out))


def log(a):
    va = value(a)
    return _record(np.log(va), tape_of(a), (a, lambda g: g / va))


def sqrt(a):
    out = np.sqrt(value(a))
    return _record(out, tape_of(a), (a, lambda g: g * 0.5 / out))


def square(a):
    va = value(a)
    return _record(va * va, tape_of(a), (a, lambda g: 2.0 * g * va))


def relu(a):
    """``max(a, 0)``; the gradient is the indicator ``a > 0``."""
    va = value(a)
    mask = va > 0
    return _record(np.where(mask, va, 0.0), tape_of(a), (a, lambda g: g * mask))


def floor(a, lo):
    """``max(a, lo)`` for a constant ``lo``; zero gradient where floored."""
    va = value(a)
    mask = va > lo
    return _record(np.where(mask, va, lo), tape_of(a), (a, lambda g: g * mask))


def total(a, axis=None):
    va = value(a)
    shape = np.shape(va)
    out = np.sum(va, axis=axis)

    def vjp(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, shape).copy()

    return _record(out, tape_of(a), (a, vjp))


def mean(a, axis=None):
    va = value(a)
    n = np.size(va) if axis is None else np.shape(va)[axis]
    return mul(total(a, axis), 1.0 / n)


def reshape(a, shape):
    va = value(a)
    old = np.shape(va)
    return _record(np.reshape(va, shape), tape_of(a), (a, lambda g: np.reshape(g, old)))


def getitem(a, idx):
    va = value(a)
    shape = np.shape(va)

    def vjp(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return out

    return _record(va[idx], tape_of(a), (a, vjp))


def stack(items, axis=0):
    vals = [value(x) for x in items]
    out = np.stack(vals, axis=axis)
    links = [(x, (lambda g, k=k: np.take(g, k, axis=axis))) for k, x in enumerate(items)]
    return _record(out, tape_of(*items), *links)


ACTIVATIONS = {
    "identity": identity,
    "tanh": tanh,
    "softplus": softplus,
    "relu": relu,
}
