"""Minimal reverse-mode differentiation over dense 2-D float64 arrays.

Enough to express small fully-connected networks and the divergence losses:
matmul, row-bias addition, relu, stable row softmax, clamped log, elementwise
arithmetic, reductions, row gathering and a hinge-style margin push. Graphs
are built eagerly; ``backward`` walks the tape once in reverse topological
order. Single-threaded by design.
"""

import numpy as np

from .backend import kernels
from .errors import DimensionError, ParameterError

LOG_EPS = 1e-12


def _as_matrix(value):
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    return np.ascontiguousarray(arr)


class Node:
    """One value in the computation graph."""

    __slots__ = ("value", "grad", "op", "parents", "_backward", "trainable", "name")

    def __init__(self, value, op="leaf", parents=(), backward_fn=None,
                 trainable=False, name=None):
        self.value = _as_matrix(value)
        self.grad = np.zeros_like(self.value)
        self.op = op
        self.parents = tuple(parents)
        self._backward = backward_fn
        self.trainable = trainable
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Node(op={self.op!r}, shape={self.value.shape})"


def constant(value, name=None):
    return Node(value, op="const", name=name)


def parameter(value, name):
    return Node(value, op="param", trainable=True, name=name)


def matmul(a, b):
    if a.value.shape[1] != b.value.shape[0]:
        raise DimensionError(
            f"matmul: inner dimensions differ ({a.value.shape} x {b.value.shape})")
    out = Node(a.value @ b.value, op="matmul", parents=(a, b))

    def backward_fn(g):
        a.grad += g @ b.value.T
        b.grad += a.value.T @ g

    out._backward = backward_fn
    return out


def add(a, b):
    """Elementwise sum; also accepts a 1-row bias added to every row of a."""
    if a.value.shape == b.value.shape:
        out = Node(a.value + b.value, op="add", parents=(a, b))

        def backward_fn(g):
            a.grad += g
            b.grad += g

    elif b.value.shape == (1, a.value.shape[1]):
        out = Node(a.value + b.value, op="add_bias", parents=(a, b))

        def backward_fn(g):
            a.grad += g
            b.grad += g.sum(axis=0, keepdims=True)

    else:
        raise DimensionError(f"add: incompatible shapes {a.value.shape}, {b.value.shape}")
    out._backward = backward_fn
    return out


def sub(a, b):
    if a.value.shape != b.value.shape:
        raise DimensionError(f"sub: incompatible shapes {a.value.shape}, {b.value.shape}")
    out = Node(a.value - b.value, op="sub", parents=(a, b))

    def backward_fn(g):
        a.grad += g
        b.grad -= g

    out._backward = backward_fn
    return out


def mul(a, b):
    if a.value.shape != b.value.shape:
        raise DimensionError(f"mul: incompatible shapes {a.value.shape}, {b.value.shape}")
    out = Node(a.value * b.value, op="mul", parents=(a, b))

    def backward_fn(g):
        a.grad += g * b.value
        b.grad += g * a.value

    out._backward = backward_fn
    return out


def scale(a, c):
    c = float(c)
    out = Node(a.value * c, op="scale", parents=(a,))

    def backward_fn(g):
        a.grad += g * c

    out._backward = backward_fn
    return out


def relu(a):
    out = Node(kernels.relu_forward(a.value), op="relu", parents=(a,))

    def backward_fn(g):
        a.grad += kernels.relu_backward(a.value, g)

    out._backward = backward_fn
    return out


def log_clamped(a, eps=LOG_EPS):
    out = Node(kernels.log_clamped_forward(a.value, eps), op="log", parents=(a,))

    def backward_fn(g):
        a.grad += kernels.log_clamped_backward(a.value, g, eps)

    out._backward = backward_fn
    return out


def rowwise_softmax(a):
    out = Node(kernels.softmax_forward(a.value), op="softmax", parents=(a,))
    probs = out.value

    def backward_fn(g):
        a.grad += kernels.softmax_backward(probs, g)

    out._backward = backward_fn
    return out


def sum_rows(a):
    """N x K -> N x 1 row sums."""
    out = Node(a.value.sum(axis=1, keepdims=True), op="sum_rows", parents=(a,))

    def backward_fn(g):
        a.grad += np.broadcast_to(g, a.value.shape)

    out._backward = backward_fn
    return out


def sum_all(a):
    out = Node([[a.value.sum()]], op="sum_all", parents=(a,))

    def backward_fn(g):
        a.grad += g[0, 0]

    out._backward = backward_fn
    return out


def mean_all(a):
    n = a.value.size
    out = Node([[a.value.mean()]], op="mean_all", parents=(a,))

    def backward_fn(g):
        a.grad += g[0, 0] / n

    out._backward = backward_fn
    return out


def gather_rows(a, indices):
    idx = np.asarray(indices, dtype=np.intp)
    out = Node(a.value[idx], op="gather", parents=(a,))

    def backward_fn(g):
        np.add.at(a.grad, idx, g)

    out._backward = backward_fn
    return out


def margin_push(a, center, margin):
    """Per entry: -|x - center| where |x - center| > margin, else 0.

    The dead band has exactly zero gradient; outside it the slope is -sign.
    """
    dist = a.value - center
    absdist = np.abs(dist)
    active = absdist > margin
    out = Node(np.where(active, -absdist, 0.0), op="margin_push", parents=(a,))

    def backward_fn(g):
        a.grad += np.where(active, -np.sign(dist), 0.0) * g

    out._backward = backward_fn
    return out


def backward(loss):
    """Populate grads of every ancestor of ``loss`` (a 1 x 1 node).

    Repeated calls accumulate; callers reset via zero_grad between steps.
    """
    if loss.value.shape != (1, 1):
        raise ParameterError(f"backward expects a scalar node, got shape {loss.value.shape}")
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    loss.grad += 1.0
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


class ParamSet:
    """Ordered, uniquely named collection of trainable nodes."""

    def __init__(self, items=()):
        self._items = {}
        for name, node in items:
            self.add(name, node)

    def add(self, name, node):
        if name in self._items:
            raise ParameterError(f"duplicate parameter name {name!r}")
        if not node.trainable:
            raise ParameterError(f"parameter {name!r} is not trainable")
        self._items[name] = node

    def names(self):
        return list(self._items)

    def nodes(self):
        return list(self._items.values())

    def items(self):
        return list(self._items.items())

    def __len__(self):
        return len(self._items)

    def __getitem__(self, name):
        return self._items[name]

    def __contains__(self, name):
        return name in self._items

    def __or__(self, other):
        return ParamSet(self.items() + other.items())

    def zero_grad(self):
        for node in self._items.values():
            node.zero_grad()

    def snapshot(self):
        """Copies of all parameter buffers, for routing checks."""
        return {name: node.value.copy() for name, node in self._items.items()}


class SGD:
    """Momentum SGD over one parameter group; grads are zeroed after a step."""

    def __init__(self, params, lr=0.01, momentum=0.9, weight_decay=5e-4):
        self.params = params
        self.lr = float(lr)
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self._vel = {name: np.zeros_like(node.value)
                     for name, node in params.items()}

    def step(self):
        for name, node in self.params.items():
            kernels.sgd_update(node.value, node.grad, self._vel[name],
                               self.lr, self.momentum, self.weight_decay)
        self.params.zero_grad()


def sgd_step(params, lr, momentum, weight_decay, velocity=None):
    """One-shot update matching SGD.step; velocity defaults to zeros."""
    if velocity is None:
        velocity = {name: np.zeros_like(node.value) for name, node in params.items()}
    for name, node in params.items():
        kernels.sgd_update(node.value, node.grad, velocity[name],
                           lr, momentum, weight_decay)
    params.zero_grad()
    return velocity
