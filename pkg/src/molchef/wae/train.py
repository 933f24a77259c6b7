"""Minibatch Adam training of the reactant-bag model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..numerics.params import ParameterStore, adam_step
from ..numerics.tensor import Tape
from .model import MoleculeChef
from .vocab import Bag


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    lr: float
    recon: float
    mmd: float
    prop: float | None

    def render(self) -> str:
        prop = "NA" if self.prop is None else f"{self.prop:.6f}"
        return f"epoch={self.epoch} lr={self.lr:g} recon={self.recon:.6f} mmd={self.mmd:.6f} prop={prop}"


def batches(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled, near-equal chunks of ``range(n)``, none smaller than two."""
    n_chunks = max(1, -(-n // batch_size))
    while n_chunks > 1 and n // n_chunks < 2:
        n_chunks -= 1
    return np.array_split(rng.permutation(n), n_chunks)


def train(model: MoleculeChef, bags: Sequence[Bag], targets: Sequence[float] | None = None,
          store: ParameterStore | None = None, seed: int | None = None,
          on_epoch: Callable[[EpochLog], None] | None = None) -> tuple[ParameterStore, list[EpochLog]]:
    """Train for ``config.epochs`` epochs; deterministic given ``seed``.

    ``targets`` are per-bag product scores for the property head; when
    omitted the head is left untrained.
    """
    c = model.config
    seed = c.seed if seed is None else seed
    if len(bags) < 2:
        raise ValueError("training needs at least two bags")
    store = model.init_params(seed) if store is None else store
    rng = np.random.default_rng([seed, 1])
    tgt = None if targets is None else np.asarray(targets, dtype=np.float64)
    names = store.names() if tgt is not None else [n for n in store.names() if not n.startswith("prop.")]
    step = 0
    log = []
    for epoch in range(c.epochs):
        lr = c.lr_at(epoch)
        sums = {"recon": 0.0, "mmd": 0.0, "prop": 0.0}
        chunks = batches(len(bags), c.batch_size, rng)
        for idx in chunks:
            with Tape() as tape:
                loss, parts = model.wae_loss([bags[i] for i in idx], store, rng,
                                             targets=None if tgt is None else tgt[idx])
                tape.backward(loss)
            step += 1
            adam_step(store, lr, step, names=names)
            for k, v in parts.items():
                sums[k] += v
        entry = EpochLog(epoch + 1, lr, sums["recon"] / len(chunks), sums["mmd"] / len(chunks),
                         None if tgt is None else sums["prop"] / len(chunks))
        log.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    store.zero_grad()
    return store, log


def reconstruction_accuracy(model: MoleculeChef, bags: Sequence[Bag], store: ParameterStore,
                            chunk: int = 256) -> float:
    """Share of bags whose posterior mean greedily decodes to the same multiset."""
    hits = 0
    for start in range(0, len(bags), chunk):
        part = list(bags[start:start + chunk])
        mean, _ = model.encode_batch(part, store)
        for bag, res in zip(part, model.decode(mean.value, store)):
            hits += tuple(sorted(bag)) == res.bag
    return hits / len(bags)
