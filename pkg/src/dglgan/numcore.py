"""Dense float64 tensors with reverse-mode autodiff, plus a seeded counter-based RNG.

Tensors are immutable values. Every op on a tensor that depends on a
gradient-tracking leaf records its parents and a vector-Jacobian closure;
:func:`grad` (via :class:`Tape`) walks that graph in reverse topological order.
"""

from __future__ import annotations

import zlib
from typing import Callable, Iterable, Mapping

import numpy as np

from . import kernels

PROB_EPS = 1e-7


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


def _check(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"{op} produced non-finite values")
    return arr


class Tensor:
    __slots__ = ("data", "requires_grad", "_parents", "_vjp", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        self.data = _check(arr, name or "tensor")
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._vjp: Callable | None = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"expected a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

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

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple, vjp: Callable, op: str) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = _check(data, op)
    out.name = None
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    else:
        out.requires_grad = False
        out._parents = ()
        out._vjp = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------- primitives


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    return _make(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b), lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    sa, sb = a.shape, b.shape
    return _make(ad * bd, (a, b), lambda g: (_unbroadcast(g * bd, sa), _unbroadcast(g * ad, sb)), "mul")


def scale(a, c: float) -> Tensor:
    """Multiply by a Python scalar constant."""
    a = as_tensor(a)
    c = float(c)
    return _make(a.data * c, (a,), lambda g: (g * c,), "scale")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = kernels.sigmoid(a.data)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def softplus(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _make(kernels.softplus(ad), (a,), lambda g: (g * kernels.sigmoid(ad),), "softplus")


def leaky_relu(a, alpha: float = 0.2) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _make(
        kernels.leaky_relu(ad, alpha), (a,), lambda g: (kernels.leaky_relu_grad(ad, g, alpha),), "leaky_relu"
    )


def relu(a) -> Tensor:
    return leaky_relu(a, 0.0)


def log(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    if (ad <= 0).any():
        raise NonFiniteError("log of non-positive value")
    return _make(np.log(ad), (a,), lambda g: (g / ad,), "log")


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.data)
    return _make(e, (a,), lambda g: (g * e,), "exp")


def absolute(a) -> Tensor:
    a = as_tensor(a)
    sign = np.sign(a.data)
    return _make(np.abs(a.data), (a,), lambda g: (g * sign,), "abs")


def square(a) -> Tensor:
    a = as_tensor(a)
    ad = a.data
    return _make(ad * ad, (a,), lambda g: (2.0 * g * ad,), "square")


def clamp(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _make(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,), "clamp")


def clamp_prob(a) -> Tensor:
    return clamp(a, PROB_EPS, 1.0 - PROB_EPS)


def mean(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    if axis is None:
        n = a.size
        return _make(np.asarray(a.data.mean()), (a,), lambda g: (np.full(shape, g / n),), "mean")
    n = shape[axis]
    return _make(
        a.data.mean(axis=axis), (a,), lambda g: (np.broadcast_to(np.expand_dims(g, axis) / n, shape),), "mean"
    )


def sum_(a) -> Tensor:
    a = as_tensor(a)
    shape = a.shape
    return _make(np.asarray(a.data.sum()), (a,), lambda g: (np.full(shape, g),), "sum")


def concat(tensors: list, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]
    return _make(
        np.concatenate([t.data for t in ts], axis=axis),
        tuple(ts),
        lambda g: tuple(np.split(g, bounds, axis=axis)),
        "concat",
    )


_UNARY = {
    "sigmoid": sigmoid,
    "softplus": softplus,
    "log": log,
    "neg": neg,
    "mean": mean,
    "exp": exp,
    "abs": absolute,
    "square": square,
    "relu": relu,
}
_BINARY = {"add": add, "mul": mul, "sub": sub}


def elementwise(kind: str, *inputs, alpha: float = 0.2) -> Tensor:
    """Dispatch an elementwise primitive by name, e.g. ``elementwise("leaky_relu", x, alpha=0.2)``."""
    if kind == "leaky_relu":
        return leaky_relu(inputs[0], alpha)
    if kind in _UNARY:
        return _UNARY[kind](*inputs)
    if kind in _BINARY:
        return _BINARY[kind](*inputs)
    raise ValueError(f"unknown elementwise kind {kind!r}")


# ---------------------------------------------------------------- reverse mode


class Tape:
    """Topologically ordered record of the ops reachable from ``root``."""

    def __init__(self, root: Tensor):
        self.root = root
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
                if id(p) not in seen:
                    stack.append((p, False))
        self.nodes = order

    def backward(self, wrt: Iterable[Tensor]) -> list[np.ndarray]:
        targets = list(wrt)
        target_ids = {id(t) for t in targets}
        relevant = set()
        for node in self.nodes:
            if id(node) in target_ids or any(id(p) in relevant for p in node._parents):
                relevant.add(id(node))
        grads = {id(self.root): np.ones_like(self.root.data)}
        for node in reversed(self.nodes):
            g = grads.get(id(node))
            if g is None or node._vjp is None or id(node) not in relevant:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                pid = id(parent)
                if pid not in relevant or pg is None:
                    continue
                if pid in grads:
                    grads[pid] = grads[pid] + pg
                else:
                    grads[pid] = pg
        return [
            np.array(grads[id(t)], dtype=np.float64) if id(t) in grads else np.zeros_like(t.data)
            for t in targets
        ]


def grad(loss: Tensor, wrt):
    """Gradient of a scalar ``loss`` with respect to ``wrt``.

    ``wrt`` is a mapping name -> Tensor (returns a dict) or a sequence of
    tensors (returns a list). Tensors the loss does not depend on get zeros.
    """
    if loss.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    tape = Tape(loss)
    if isinstance(wrt, Mapping):
        keys = list(wrt)
        values = tape.backward([wrt[k] for k in keys])
        out = {}
        for k, v in zip(keys, values):
            out[k] = _check(v, f"gradient of {k}")
        return out
    return [_check(v, "gradient") for v in tape.backward(list(wrt))]


# ---------------------------------------------------------------- RNG


def _key_part(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode())
    return int(k)


class Rng:
    """Counter-based (Philox) stream addressed by a seed and a key path.

    ``split(*key)`` derives an independent child stream; the same seed and
    key path always reproduce the same stream, so per-step streams such as
    ``rng.split("data", step)`` need no saved state to resume.
    """

    def __init__(self, seed: int, key: tuple = ()):
        self.seed = int(seed)
        self.key = tuple(key)
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_key_part(k) for k in self.key))
        self._gen = np.random.Generator(np.random.Philox(ss))

    def split(self, *key) -> "Rng":
        return Rng(self.seed, self.key + tuple(key))

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=shape)

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def integers(self, high: int, shape) -> np.ndarray:
        return self._gen.integers(0, high, size=shape)
