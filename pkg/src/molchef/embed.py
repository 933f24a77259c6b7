"""Gated graph neural network embeddings of molecules.

Every graph is relabelled into canonical-rank order before featurization,
so message sums and the readout accumulate in the same order for any
input atom ordering and embeddings are bit-identical under permutation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chem.canon import canonical_order
from .chem.elements import DEFAULT_TABLE, ElementTable
from .chem.features import N_SCALARS, feature_length, feature_matrix
from .chem.graph import BondOrder, MolecularGraph
from .numerics import ops as T
from .numerics.layers import gru_layer, init_gru, init_linear, linear
from .numerics.params import ParameterStore
from .numerics.tensor import Tensor

BOND_TYPES = (BondOrder.SINGLE, BondOrder.DOUBLE, BondOrder.TRIPLE, BondOrder.AROMATIC)
_BOND_NAMES = ("single", "double", "triple", "aromatic")


def _feature_scale(table: ElementTable) -> np.ndarray:
    scale = np.ones(feature_length(table))
    scale[-N_SCALARS + 2] = 0.1  # atomic number
    return scale


@dataclass
class GraphBatch:
    """Disjoint union of canonically ordered graphs, ready for message passing."""

    features: np.ndarray  # (n_nodes, feature_dim)
    edge_source: np.ndarray  # flat index src * 4 + bond type
    edge_target: np.ndarray
    node_graph: np.ndarray  # graph id of each node
    n_graphs: int
    orders: list[list[int]]  # canonical order of each input graph
    offsets: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]


def make_batch(graphs: Sequence[MolecularGraph], table: ElementTable = DEFAULT_TABLE) -> GraphBatch:
    feats, src, dst, node_graph, orders = [], [], [], [], []
    offsets = [0]
    scale = _feature_scale(table)
    for gi, graph in enumerate(graphs):
        order = canonical_order(graph)
        cg = graph.permuted(order)
        off = offsets[-1]
        feats.append(feature_matrix(cg, table) * scale)
        edges = []
        for b in cg.bonds:
            t = BOND_TYPES.index(b.order)
            edges.append((b.end, b.begin, t))
            edges.append((b.begin, b.end, t))
        edges.sort()
        for d, s, t in edges:
            src.append((s + off) * len(BOND_TYPES) + t)
            dst.append(d + off)
        node_graph.extend([gi] * cg.n_atoms)
        orders.append(order)
        offsets.append(off + cg.n_atoms)
    fdim = feature_length(table)
    return GraphBatch(
        features=np.concatenate(feats) if feats else np.zeros((0, fdim)),
        edge_source=np.asarray(src, dtype=np.int64),
        edge_target=np.asarray(dst, dtype=np.int64),
        node_graph=np.asarray(node_graph, dtype=np.int64),
        n_graphs=len(graphs),
        orders=orders,
        offsets=np.asarray(offsets, dtype=np.int64),
    )


def concat_batches(batches: Sequence[GraphBatch]) -> GraphBatch:
    """Join precomputed batches into one, preserving graph order."""
    feats, src, dst, node_graph, orders, offsets = [], [], [], [], [], [0]
    n_graphs = 0
    for b in batches:
        off = offsets[-1]
        feats.append(b.features)
        node_id, bond_type = np.divmod(b.edge_source, len(BOND_TYPES))
        src.append((node_id + off) * len(BOND_TYPES) + bond_type)
        dst.append(b.edge_target + off)
        node_graph.append(b.node_graph + n_graphs)
        orders.extend(b.orders)
        offsets.extend((b.offsets[1:] + off).tolist())
        n_graphs += b.n_graphs
    return GraphBatch(np.concatenate(feats), np.concatenate(src), np.concatenate(dst),
                      np.concatenate(node_graph), n_graphs, orders, np.asarray(offsets, dtype=np.int64))


class GGNN:
    """Gated graph network with a gated weighted-sum readout.

    Parameters live in a ParameterStore under ``prefix``.
    """

    def __init__(self, prefix: str = "ggnn", node_dim: int = 101, out_dim: int = 50, steps: int = 4,
                 table: ElementTable = DEFAULT_TABLE):
        self.prefix = prefix
        self.node_dim = node_dim
        self.out_dim = out_dim
        self.steps = steps
        self.table = table

    def init(self, store: ParameterStore, rng: np.random.Generator) -> None:
        p, d = self.prefix, self.node_dim
        init_linear(store, f"{p}.input", feature_length(self.table), d, rng)
        bound = 1.0 / np.sqrt(d)
        for name in _BOND_NAMES:
            store.add(f"{p}.message.{name}", rng.uniform(-bound, bound, (d, d)))
        init_gru(store, f"{p}.update", d, d, 1, rng)
        init_linear(store, f"{p}.gate", d, 1, rng)
        init_linear(store, f"{p}.output", d, self.out_dim, rng, bias=False)

    def propagate(self, batch: GraphBatch, store: ParameterStore, steps: int | None = None) -> Tensor:
        """Node states for the whole batch, in canonical batch order."""
        p = self.prefix
        steps = self.steps if steps is None else steps
        h = linear(batch.features, store, f"{p}.input")
        if steps == 0:
            return h
        messages_w = T.concat([store[f"{p}.message.{name}"] for name in _BOND_NAMES], axis=1)
        n, d = batch.n_nodes, self.node_dim
        for _ in range(steps):
            per_type = T.reshape(T.matmul(h, messages_w), (n * len(BOND_TYPES), d))
            if len(batch.edge_source):
                msg = T.segment_sum(T.take(per_type, batch.edge_source), batch.edge_target, n)
            else:
                msg = Tensor(np.zeros((n, d)))
            h = gru_layer(msg, h, store, f"{p}.update.0")
        return h

    def readout(self, node_states, node_graph: np.ndarray, n_graphs: int, store: ParameterStore) -> Tensor:
        p = self.prefix
        gate = T.sigmoid(linear(node_states, store, f"{p}.gate"))
        pooled = T.segment_sum(T.mul(node_states, gate), node_graph, n_graphs)
        return T.matmul(pooled, store[f"{p}.output.weight"])

    def embed_batch(self, batch: GraphBatch, store: ParameterStore) -> Tensor:
        """(n_graphs, out_dim) graph embeddings."""
        h = self.propagate(batch, store)
        return self.readout(h, batch.node_graph, batch.n_graphs, store)

    # single-graph conveniences

    def embed_nodes(self, graph: MolecularGraph, store: ParameterStore, steps: int | None = None) -> Tensor:
        """Node states with row ``i`` belonging to input atom ``i``."""
        batch = make_batch([graph], self.table)
        h = self.propagate(batch, store, steps)
        inverse = np.argsort(batch.orders[0])
        return T.take(h, inverse)

    def aggregate(self, node_states, store: ParameterStore) -> Tensor:
        states = T.as_tensor(node_states)
        return T.reshape(self.readout(states, np.zeros(states.shape[0], dtype=np.int64), 1, store),
                         (self.out_dim,))

    def embed_molecule(self, graph: MolecularGraph, store: ParameterStore) -> Tensor:
        return T.reshape(self.embed_batch(make_batch([graph], self.table), store), (self.out_dim,))
