"""Latent-space search: property-gradient ascent and a random-walk baseline."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..chem.descriptors import surrogate_qed
from ..chem.graph import MolecularGraph
from ..chem.smiles import parse_smiles
from ..numerics.params import ParameterStore
from ..numerics.tensor import Tape, Tensor
from ..reactions.templates import ProductBag, predict_products
from ..wae.model import MoleculeChef
from ..wae.vocab import Bag

Oracle = Callable[[Sequence[MolecularGraph]], ProductBag]


@dataclass(frozen=True)
class TraceEntry:
    step: int
    z: np.ndarray
    bag: Bag
    bag_smiles: str  # dot-joined reactants
    predicted: float
    product: str | None
    score: float | None  # surrogate score of the main product; None if invalid


@dataclass
class OptimizationTrace:
    """Start point plus every newly distinct decoded bag, in discovery order."""

    start: TraceEntry
    entries: list[TraceEntry] = field(default_factory=list)
    empty_decodes: int = 0
    steps: int = 0

    @property
    def best_index(self) -> int | None:
        scored = [(e.score, -i) for i, e in enumerate(self.entries) if e.score is not None]
        return -max(scored)[1] if scored else None

    @property
    def best_score(self) -> float | None:
        """Best score among new bags, or the start score if none was found."""
        i = self.best_index
        return self.start.score if i is None else self.entries[i].score

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "z_norm", "bag", "predicted", "score"])
            for e in [self.start] + self.entries:
                w.writerow([e.step, f"{np.linalg.norm(e.z):.6f}", e.bag_smiles, f"{e.predicted:.6f}",
                            "NA" if e.score is None else f"{e.score:.6f}"])


def score_bag(model: MoleculeChef, bag: Bag, oracle: Oracle | None = None) -> tuple[str | None, float | None]:
    """React a bag and score its main product; (None, None) when invalid."""
    result = (oracle or predict_products)(model.vocab.bag_graphs(bag))
    if result.invalid or result.primary is None:
        return None, None
    return result.primary, surrogate_qed(parse_smiles(result.primary))


def property_gradient(model: MoleculeChef, z: np.ndarray, store: ParameterStore) -> tuple[float, np.ndarray]:
    """Predicted score and its gradient with respect to ``z``."""
    zt = Tensor(np.array(z, dtype=np.float64), requires_grad=True)
    with Tape() as tape:
        score = model.property_head(zt, store)
        tape.backward(score)
    return score.item(), zt.grad


class _Search:
    def __init__(self, model: MoleculeChef, store: ParameterStore, start_bag: Bag, k: int, max_steps: int,
                 oracle: Oracle | None):
        self.model = model
        self.store = store.frozen()
        self.k = k
        self.max_steps = max_steps
        self.oracle = oracle
        self.embeddings = model.vocab_embeddings(self.store).value
        bag = tuple(sorted(start_bag))
        self.z = model.encode(bag, self.store).mean
        product, score = score_bag(model, bag, oracle)
        start = TraceEntry(0, self.z.copy(), bag, self.smiles(bag), self.predicted(self.z), product, score)
        self.trace = OptimizationTrace(start)
        self.seen = {bag}

    def smiles(self, bag: Bag) -> str:
        return ".".join(self.model.vocab.bag_smiles(bag))

    def predicted(self, z: np.ndarray) -> float:
        return self.model.property_head(z, self.store).item()

    def visit(self, step: int) -> bool:
        """Decode the current point; True once ``k`` new bags are collected."""
        self.trace.steps = step
        result = self.model.decode(self.z, self.store, embeddings=self.embeddings)[0]
        if result.empty:
            self.trace.empty_decodes += 1
        elif result.bag not in self.seen:
            self.seen.add(result.bag)
            product, score = score_bag(self.model, result.bag, self.oracle)
            self.trace.entries.append(TraceEntry(step, self.z.copy(), result.bag, self.smiles(result.bag),
                                                 self.predicted(self.z), product, score))
        return len(self.trace.entries) >= self.k


def local_optimize(model: MoleculeChef, store: ParameterStore, start_bag: Bag, step_size: float = 0.1,
                   max_steps: int = 1000, k: int = 10, oracle: Oracle | None = None) -> OptimizationTrace:
    """Normalized gradient ascent on the property head from the start bag's posterior mean."""
    search = _Search(model, store, start_bag, k, max_steps, oracle)
    for step in range(1, max_steps + 1):
        _, grad = property_gradient(model, search.z, search.store)
        norm = np.linalg.norm(grad)
        if norm == 0.0 or step_size == 0.0:
            break  # stationary: the point can never move again
        search.z = search.z + step_size * grad / norm
        if search.visit(step):
            break
    return search.trace


def random_walk(model: MoleculeChef, store: ParameterStore, start_bag: Bag, sigma: float = 0.1,
                max_steps: int = 1000, k: int = 10, rng: np.random.Generator | None = None,
                oracle: Oracle | None = None) -> OptimizationTrace:
    """Gaussian random walk from the start bag's posterior mean."""
    rng = np.random.default_rng(0) if rng is None else rng
    search = _Search(model, store, start_bag, k, max_steps, oracle)
    if sigma == 0.0:
        return search.trace
    for step in range(1, max_steps + 1):
        search.z = search.z + sigma * rng.standard_normal(search.z.shape)
        if search.visit(step):
            break
    return search.trace
