"""Named parameter storage, Adam, and the finite-difference gradient oracle."""

from __future__ import annotations

import copy
from typing import Callable, Iterable, Iterator

import numpy as np

from .tensor import ShapeMismatch, Tensor


class ParameterStore:
    """Ordered mapping of name -> leaf tensor, plus Adam moment slots.

    Iteration order is insertion order.
    """

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        self._m[name] = np.zeros_like(t.value)
        self._v[name] = np.zeros_like(t.value)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self, prefix: str = "") -> list[str]:
        return [n for n in self._params if n.startswith(prefix)]

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def grad(self, name: str) -> np.ndarray:
        t = self._params[name]
        return np.zeros_like(t.value) if t.grad is None else t.grad

    def moments(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        return self._m[name], self._v[name]

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def set_value(self, name: str, value) -> None:
        value = np.asarray(value, dtype=np.float64)
        t = self._params[name]
        if value.shape != t.shape:
            raise ShapeMismatch(f"{name}: expected {t.shape}, got {value.shape}")
        t.value = value.copy()

    def arrays(self) -> dict[str, np.ndarray]:
        return {n: t.value.copy() for n, t in self._params.items()}

    def update(self, other: "ParameterStore", prefix: str = "") -> None:
        """Copy values (not moments) for every name of ``other`` starting with ``prefix``."""
        for name in other.names(prefix):
            self.set_value(name, other[name].value)

    def copy(self) -> "ParameterStore":
        return copy.deepcopy(self)

    def frozen(self) -> "ParameterStore":
        """Copy whose tensors do not require gradients."""
        out = self.copy()
        for t in out._params.values():
            t.requires_grad = False
            t.grad = None
        return out


def adam_step(store: ParameterStore, lr: float, t: int, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8, names: Iterable[str] | None = None) -> ParameterStore:
    """One bias-corrected Adam update (``t`` counts from 1); zeroes gradients."""
    if t < 1:
        raise ValueError("Adam step count starts at 1")
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name in (store.names() if names is None else names):
        p = store[name]
        if p.grad is None:
            g = np.zeros_like(p.value)
        else:
            g = p.grad
        m, v = store.moments(name)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.value = p.value - lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.grad = None
    return store


def finite_diff_grad(loss_fn: Callable[[ParameterStore], float], store: ParameterStore,
                     epsilon: float = 1e-5, names: Iterable[str] | None = None) -> dict[str, np.ndarray]:
    """Central-difference gradient of ``loss_fn`` for every scalar parameter."""
    out = {}
    for name in (store.names() if names is None else names):
        p = store[name]
        base = p.value
        grad = np.zeros_like(base)
        flat = grad.reshape(-1)
        for k in range(base.size):
            work = base.copy()
            work.reshape(-1)[k] += epsilon
            p.value = work
            up = float(loss_fn(store))
            work = base.copy()
            work.reshape(-1)[k] -= epsilon
            p.value = work
            down = float(loss_fn(store))
            flat[k] = (up - down) / (2.0 * epsilon)
        p.value = base
        out[name] = grad
    return out
