"""Atom featurization for graph networks."""

from __future__ import annotations

import math

import numpy as np

from .elements import DEFAULT_TABLE, ElementTable
from .graph import BondOrder, MolecularGraph

DEGREE_BUCKETS = (0, 1, 2, 3, 4, 5, 6, 7, 10)
VALENCE_BUCKETS = (0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14)
N_SCALARS = 5  # H count, electronegativity, atomic number, aromatic, charge


def feature_length(table: ElementTable = DEFAULT_TABLE) -> int:
    return len(table) + len(DEGREE_BUCKETS) + len(VALENCE_BUCKETS) + N_SCALARS


def _bucket(value: int, buckets: tuple[int, ...]) -> int:
    for k, b in enumerate(buckets):
        if value <= b:
            return k
    return len(buckets) - 1


def explicit_valence(graph: MolecularGraph, i: int) -> int:
    """Bond-order sum with aromatic bonds at 1.5, floored."""
    return int(math.floor(sum(o.valence for _, o in graph.adjacency[i]) + 1e-9))


def atom_features(graph: MolecularGraph, atom_index: int, table: ElementTable = DEFAULT_TABLE) -> np.ndarray:
    """Feature vector: element one-hot, degree one-hot, explicit-valence
    one-hot, then H count, electronegativity, atomic number, aromatic flag
    and formal charge.

    Raises UnsupportedElement for elements outside ``table``.
    """
    atom = graph.atoms[atom_index]
    data = table.data(atom.element)
    out = np.zeros(feature_length(table))
    out[table.index[atom.element]] = 1.0
    off = len(table)
    out[off + _bucket(graph.degree(atom_index), DEGREE_BUCKETS)] = 1.0
    off += len(DEGREE_BUCKETS)
    out[off + _bucket(explicit_valence(graph, atom_index), VALENCE_BUCKETS)] = 1.0
    off += len(VALENCE_BUCKETS)
    aromatic = atom.aromatic or any(o is BondOrder.AROMATIC for _, o in graph.adjacency[atom_index])
    out[off:off + N_SCALARS] = (
        graph.hydrogens[atom_index],
        data.electronegativity,
        data.atomic_number,
        float(aromatic),
        atom.charge,
    )
    return out


def feature_matrix(graph: MolecularGraph, table: ElementTable = DEFAULT_TABLE) -> np.ndarray:
    return np.stack([atom_features(graph, i, table) for i in range(graph.n_atoms)]) if graph.n_atoms else \
        np.zeros((0, feature_length(table)))


def one_hot_segments(table: ElementTable = DEFAULT_TABLE) -> list[slice]:
    a = len(table)
    b = a + len(DEGREE_BUCKETS)
    c = b + len(VALENCE_BUCKETS)
    return [slice(0, a), slice(a, b), slice(b, c)]
