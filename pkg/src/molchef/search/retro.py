"""Single-step retrosynthesis by regressing products into the latent space."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..chem.descriptors import surrogate_qed
from ..chem.graph import MolecularGraph
from ..chem.smiles import parse_smiles
from ..config import RunConfig
from ..embed import GGNN, GraphBatch, concat_batches, make_batch
from ..numerics import ops as T
from ..numerics.layers import init_mlp, mlp
from ..numerics.params import ParameterStore, adam_step
from ..numerics.tensor import Tape, Tensor
from ..reactions.templates import ProductBag, predict_products
from ..wae.model import DecodeResult, MoleculeChef
from ..wae.train import batches

Oracle = Callable[[Sequence[MolecularGraph]], ProductBag]


class UnreachableBag(ValueError):
    pass


def main_product(products: Sequence[str]) -> str:
    """Largest product of a reaction record (most heavy atoms, then smallest SMILES)."""
    return ProductBag(tuple(products)).primary


class RetroRegressor:
    """Graph network plus four dense layers from a product to a latent point."""

    N_LAYERS = 4

    def __init__(self, config: RunConfig = RunConfig()):
        self.config = config
        self.ggnn = GGNN("retro.ggnn", config.node_dim, config.embed_dim, config.ggnn_steps)

    def init_params(self, seed: int) -> ParameterStore:
        c = self.config
        rng = np.random.default_rng([seed, 2])
        store = ParameterStore()
        self.ggnn.init(store, rng)
        sizes = [c.embed_dim] + [c.retro_hidden] * (self.N_LAYERS - 1) + [c.latent_dim]
        init_mlp(store, "retro.fc", sizes, rng)
        return store

    def forward(self, batch: GraphBatch, store: ParameterStore) -> Tensor:
        return mlp(self.ggnn.embed_batch(batch, store), store, "retro.fc", self.N_LAYERS)

    def predict(self, graphs: Sequence[MolecularGraph], store: ParameterStore) -> np.ndarray:
        return self.forward(make_batch(graphs, self.ggnn.table), store).value


@dataclass(frozen=True)
class RetroEpoch:
    epoch: int
    lr: float
    mse: float

    def render(self) -> str:
        return f"epoch={self.epoch} lr={self.lr:g} mse={self.mse:.6f}"


def retro_targets(model: MoleculeChef, wae_store: ParameterStore, reactant_sets: Sequence[Sequence[str]],
                  products: Sequence[str]) -> tuple[list[str], np.ndarray, int]:
    """Posterior-mean targets for reachable reactions; returns (products, targets, skipped)."""
    keep, bags, skipped = [], [], 0
    for reactants, product in zip(reactant_sets, products):
        if all(s in model.vocab for s in reactants) and len(reactants) <= model.config.max_steps:
            keep.append(product)
            bags.append(model.vocab.bag(reactants))
        else:
            skipped += 1
    if not keep:
        raise UnreachableBag("no reaction has all reactants in the vocabulary")
    mean, _ = model.encode_batch(bags, wae_store.frozen())
    return keep, mean.value, skipped


def train_retro_regressor(regressor: RetroRegressor, model: MoleculeChef, wae_store: ParameterStore,
                          reactant_sets: Sequence[Sequence[str]], products: Sequence[str], seed: int | None = None,
                          on_epoch: Callable[[RetroEpoch], None] | None = None
                          ) -> tuple[ParameterStore, list[RetroEpoch], int]:
    """MSE regression of products onto frozen posterior means.

    Returns the regressor parameters, the per-epoch log, and the number of
    reactions skipped for having out-of-vocabulary reactants.
    """
    c = regressor.config
    seed = c.seed if seed is None else seed
    kept, targets, skipped = retro_targets(model, wae_store, reactant_sets, products)
    singles = [make_batch([parse_smiles(p)], regressor.ggnn.table) for p in kept]
    store = regressor.init_params(seed)
    rng = np.random.default_rng([seed, 3])
    step, log = 0, []
    for epoch in range(c.retro_epochs):
        lr = c.lr_at(epoch)
        total = 0.0
        chunks = batches(len(kept), c.retro_batch_size, rng) if len(kept) > 1 else [np.arange(1)]
        for idx in chunks:
            with Tape() as tape:
                pred = regressor.forward(concat_batches([singles[i] for i in idx]), store)
                loss = T.mean(T.square(T.sub(pred, targets[idx])))
                tape.backward(loss)
            step += 1
            adam_step(store, lr, step)
            total += loss.item() * len(idx)
        entry = RetroEpoch(epoch + 1, lr, total / len(kept))
        log.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
    return store, log, skipped


def retrosynthesize(product: MolecularGraph, regressor: RetroRegressor, retro_store: ParameterStore,
                    model: MoleculeChef, wae_store: ParameterStore) -> DecodeResult:
    """Greedy decode of the regressed latent point; check ``.empty`` for failure."""
    z = regressor.predict([product], retro_store)
    return model.decode(z, wae_store)[0]


@dataclass(frozen=True)
class RoundTripRow:
    product: str
    reconstructed: str | None  # main product of the suggested bag
    bag: str | None  # dot-joined suggested reactants
    score_orig: float
    score_recon: float | None


@dataclass
class RoundTripResult:
    rows: list[RoundTripRow]

    @property
    def pearson_r(self) -> float:
        """Correlation over rows with a reconstruction; NaN when undefined."""
        pairs = np.array([(r.score_orig, r.score_recon) for r in self.rows if r.score_recon is not None])
        if len(pairs) < 2 or np.ptp(pairs[:, 0]) == 0 or np.ptp(pairs[:, 1]) == 0:
            return math.nan
        return float(np.corrcoef(pairs[:, 0], pairs[:, 1])[0, 1])

    @property
    def failures(self) -> int:
        return sum(r.score_recon is None for r in self.rows)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["product", "reconstructed", "score_orig", "score_recon"])
            for r in self.rows:
                w.writerow([r.product, r.reconstructed or "NA", f"{r.score_orig:.6f}",
                            "NA" if r.score_recon is None else f"{r.score_recon:.6f}"])


def format_r(r: float) -> str:
    return "NA" if math.isnan(r) else f"{r:.6f}"


def retro_roundtrip_eval(products: Sequence[str], regressor: RetroRegressor, retro_store: ParameterStore,
                         model: MoleculeChef, wae_store: ParameterStore, oracle: Oracle | None = None
                         ) -> RoundTripResult:
    """Product -> suggested reactants -> predicted product, scored before and after."""
    react = oracle or predict_products
    rows: list[RoundTripRow] = []
    if not products:
        return RoundTripResult(rows)
    graphs = [parse_smiles(p) for p in products]
    decoded = model.decode(regressor.predict(graphs, retro_store), wae_store)
    for product, graph, res in zip(products, graphs, decoded):
        orig = surrogate_qed(graph)
        if res.empty:
            rows.append(RoundTripRow(product, None, None, orig, None))
            continue
        result = react(model.vocab.bag_graphs(res.bag))
        recon = None if result.invalid else result.primary
        rows.append(RoundTripRow(product, recon, ".".join(model.vocab.bag_smiles(res.bag)), orig,
                                 None if recon is None else surrogate_qed(parse_smiles(recon))))
    return RoundTripResult(rows)


def embedding_distances(products: Sequence[str], reconstructed: Sequence[str], ggnn: GGNN,
                        store: ParameterStore, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Distances between paired embeddings, and between randomly re-paired ones."""
    a = ggnn.embed_batch(make_batch([parse_smiles(s) for s in products], ggnn.table), store).value
    b = ggnn.embed_batch(make_batch([parse_smiles(s) for s in reconstructed], ggnn.table), store).value
    paired = np.linalg.norm(a - b, axis=1)
    shuffled = np.linalg.norm(a - b[rng.permutation(len(b))], axis=1)
    return paired, shuffled

