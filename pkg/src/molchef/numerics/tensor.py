"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations record themselves on the innermost active :class:`Tape` when
any input requires a gradient.  Outside a tape they only compute values,
which is how frozen models are evaluated.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class ShapeMismatch(ValueError):
    pass


class NonFiniteValue(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value)

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape})"

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
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)


Backward = Callable[[np.ndarray], Sequence[np.ndarray | None]]

_ACTIVE: list["Tape"] = []


class Tape:
    """Records primitive ops; ``backward`` replays them in reverse."""

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Backward]] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE.remove(self)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], backward: Backward) -> None:
        self.records.append((out, inputs, backward))

    def backward(self, loss: Tensor, seed: np.ndarray | None = None) -> None:
        """Accumulate d(loss)/d(x) into ``x.grad`` for every recorded input."""
        if seed is None:
            if loss.value.size != 1:
                raise ShapeMismatch("backward without a seed needs a scalar loss")
            seed = np.ones_like(loss.value)
        loss.grad = seed if loss.grad is None else loss.grad + seed
        for out, inputs, fn in reversed(self.records):
            g = out.grad
            if g is None:
                continue
            for t, gi in zip(inputs, fn(g)):
                if gi is None or not t.requires_grad:
                    continue
                t.grad = gi if t.grad is None else t.grad + gi
        for out, _, _ in self.records:
            out.grad = None
        self.records.clear()


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _finish(name: str, value: np.ndarray, inputs: tuple[Tensor, ...], backward: Backward) -> Tensor:
    if not np.all(np.isfinite(value)):
        raise NonFiniteValue(f"{name} produced a non-finite value")
    needs = any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=needs)
    if needs and _ACTIVE:
        _ACTIVE[-1].record(out, inputs, backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(name: str, a: Tensor, b: Tensor) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(f"{name}: {a.shape} vs {b.shape}") from None


# ------------------------------------------------------------------ binary

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return _finish("add", a.value + b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return _finish("sub", a.value - b.value, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    return _finish("mul", a.value * b.value, (a, b),
                   lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)))


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or a.shape[-1] != b.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value

    def backward(g):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 1 and bv.ndim == 2:
            return bv @ g, np.outer(av, g)
        if av.ndim == 2:
            return np.outer(g, bv), av.T @ g
        return g * bv, g * av

    return _finish("matmul", av @ bv, (a, b), backward)


# ------------------------------------------------------------------- unary

def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    return _finish("scale", a.value * c, (a,), lambda g: (g * c,))


def add_scalar(a, c: float) -> Tensor:
    a = as_tensor(a)
    return _finish("add_scalar", a.value + c, (a,), lambda g: (g,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    v = a.value
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return _finish("sigmoid", out, (a,), lambda g: (g * out * (1.0 - out),))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.value)
    return _finish("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.value > 0
    return _finish("relu", np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,))


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):  # overflow is reported by _finish
        out = np.exp(a.value)
    return _finish("exp", out, (a,), lambda g: (g * out,))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _finish("square", a.value * a.value, (a,), lambda g: (2.0 * g * a.value,))


def reciprocal(a) -> Tensor:
    a = as_tensor(a)
    out = 1.0 / a.value
    return _finish("reciprocal", out, (a,), lambda g: (-g * out * out,))


# ------------------------------------------------------------- reductions

def sum(a, axis: int | None = None) -> Tensor:  # noqa: A001 - mirrors numpy
    a = as_tensor(a)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _finish("sum", a.value.sum(axis=axis), (a,), backward)


def mean(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    n = a.value.size if axis is None else a.shape[axis]
    return scale(sum(a, axis), 1.0 / n)


# ---------------------------------------------------------------- shaping

def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = tuple(as_tensor(t) for t in tensors)
    try:
        value = np.concatenate([t.value for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(f"concat: {[t.shape for t in ts]}") from e
    bounds = np.cumsum([0] + [t.shape[axis] for t in ts])

    def backward(g):
        return [np.take(g, np.arange(bounds[k], bounds[k + 1]), axis=axis) for k in range(len(ts))]

    return _finish("concat", value, ts, backward)


def slice_(a, key) -> Tensor:
    """Basic (non-fancy) indexing."""
    a = as_tensor(a)

    def backward(g):
        out = np.zeros_like(a.value)
        out[key] += g
        return (out,)

    return _finish("slice", np.array(a.value[key]), (a,), backward)


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        value = a.value.reshape(shape)
    except ValueError as e:
        raise ShapeMismatch(f"reshape {a.shape} -> {shape}") from e
    return _finish("reshape", value, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    return _finish("transpose", a.value.T.copy(), (a,), lambda g: (g.T,))


def take(a, indices) -> Tensor:
    """Gather rows ``a[indices]``."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.int64)

    def backward(g):
        out = np.zeros_like(a.value)
        np.add.at(out, idx, g)
        return (out,)

    return _finish("take", a.value[idx], (a,), backward)


def segment_sum(a, segment_ids, n_segments: int) -> Tensor:
    """``out[s] = sum of rows i with segment_ids[i] == s``, accumulated in row order."""
    a = as_tensor(a)
    ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.shape[0] != a.shape[0]:
        raise ShapeMismatch("segment_sum: one id per row required")
    out = np.zeros((n_segments,) + a.shape[1:])
    np.add.at(out, ids, a.value)
    return _finish("segment_sum", out, (a,), lambda g: (g[ids],))


# ------------------------------------------------------------------ losses

def softmax_cross_entropy(logits, target) -> Tensor:
    """Cross-entropy of integer targets under softmax(logits).

    ``logits`` of shape (k,) with an integer target gives a scalar; shape
    (n, k) with n targets gives a length-n vector of per-row losses.
    """
    logits = as_tensor(logits)
    v = logits.value
    single = v.ndim == 1
    v2 = v[None, :] if single else v
    tgt = np.atleast_1d(np.asarray(target, dtype=np.int64))
    if v2.ndim != 2 or tgt.shape != (v2.shape[0],) or (tgt < 0).any() or (tgt >= v2.shape[1]).any():
        raise ShapeMismatch(f"softmax_cross_entropy: logits {v.shape}, target {np.shape(target)}")
    shift = v2.max(axis=1, keepdims=True)
    z = v2 - shift
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(v2.shape[0])
    loss = lse - z[rows, tgt]
    probs = np.exp(z - lse[:, None])

    def backward(g):
        g2 = np.atleast_1d(g)
        grad = probs.copy()
        grad[rows, tgt] -= 1.0
        grad *= g2[:, None]
        return (grad[0] if single else grad,)

    return _finish("softmax_cross_entropy", loss[0] if single else loss, (logits,), backward)


def pairwise_sq_dists(a, b) -> Tensor:
    """Matrix of squared Euclidean distances between rows of a and rows of b."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ShapeMismatch(f"pairwise_sq_dists: {a.shape} vs {b.shape}")
    diff = a.value[:, None, :] - b.value[None, :, :]
    d = (diff * diff).sum(axis=2)

    def backward(g):
        ga = 2.0 * (a.value * g.sum(axis=1)[:, None] - g @ b.value)
        gb = 2.0 * (b.value * g.sum(axis=0)[:, None] - g.T @ a.value)
        return ga, gb

    return _finish("pairwise_sq_dists", d, (a, b), backward)
