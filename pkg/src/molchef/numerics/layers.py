"""Dense layers and the GRU cell built from tape primitives."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import tensor as T
from .params import ParameterStore
from .tensor import ShapeMismatch, Tensor


def glorot(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out))


def init_linear(store: ParameterStore, name: str, n_in: int, n_out: int,
                rng: np.random.Generator, bias: bool = True) -> None:
    store.add(f"{name}.weight", glorot(rng, n_in, n_out))
    if bias:
        store.add(f"{name}.bias", np.zeros(n_out))


def linear(x, store: ParameterStore, name: str) -> Tensor:
    out = T.matmul(x, store[f"{name}.weight"])
    bias = f"{name}.bias"
    if bias in store:
        out = T.add(out, store[bias])
    return out


def init_mlp(store: ParameterStore, name: str, sizes: Sequence[int], rng: np.random.Generator) -> None:
    for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        init_linear(store, f"{name}.{k}", a, b, rng)


def mlp(x, store: ParameterStore, name: str, n_layers: int) -> Tensor:
    """Stack of linear layers with ReLU between them (none after the last)."""
    h = x
    for k in range(n_layers):
        h = linear(h, store, f"{name}.{k}")
        if k < n_layers - 1:
            h = T.relu(h)
    return h


def init_gru(store: ParameterStore, name: str, input_size: int, hidden_size: int,
             n_layers: int, rng: np.random.Generator) -> None:
    bound = 1.0 / np.sqrt(hidden_size)
    for layer in range(n_layers):
        n_in = input_size if layer == 0 else hidden_size
        p = f"{name}.{layer}"
        store.add(f"{p}.w_input", rng.uniform(-bound, bound, (n_in, 3 * hidden_size)))
        store.add(f"{p}.w_hidden", rng.uniform(-bound, bound, (hidden_size, 3 * hidden_size)))
        store.add(f"{p}.b_input", rng.uniform(-bound, bound, 3 * hidden_size))
        store.add(f"{p}.b_hidden", rng.uniform(-bound, bound, 3 * hidden_size))


def gru_layer(x, h, store: ParameterStore, prefix: str) -> Tensor:
    """Single GRU update (reset, update, candidate gates)."""
    w_in = store[f"{prefix}.w_input"]
    w_h = store[f"{prefix}.w_hidden"]
    if x.shape[-1] != w_in.shape[0] or h.shape[-1] != w_h.shape[0]:
        raise ShapeMismatch(f"{prefix}: input {x.shape}, hidden {h.shape}")
    size = w_h.shape[0]
    gi = T.add(T.matmul(x, w_in), store[f"{prefix}.b_input"])
    gh = T.add(T.matmul(h, w_h), store[f"{prefix}.b_hidden"])
    cols = lambda k: (Ellipsis, slice(k * size, (k + 1) * size))  # noqa: E731
    reset = T.sigmoid(T.add(T.slice_(gi, cols(0)), T.slice_(gh, cols(0))))
    update = T.sigmoid(T.add(T.slice_(gi, cols(1)), T.slice_(gh, cols(1))))
    cand = T.tanh(T.add(T.slice_(gi, cols(2)), T.mul(reset, T.slice_(gh, cols(2)))))
    # h' = (1 - u) * cand + u * h
    return T.add(cand, T.mul(update, T.sub(h, cand)))


def gru_cell(x, hidden: Sequence[Tensor], store: ParameterStore, name: str) -> list[Tensor]:
    """Multi-layer GRU step; each layer's new state feeds the next layer."""
    out = []
    inp = x
    for layer, h in enumerate(hidden):
        new = gru_layer(inp, h, store, f"{name}.{layer}")
        out.append(new)
        inp = new
    return out
