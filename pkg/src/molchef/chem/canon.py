"""Canonical atom ranking by iterative invariant refinement."""

from __future__ import annotations

from typing import Hashable, Sequence

from .graph import MolecularGraph, _VALENCE_TABLE


def _atomic_number(symbol: str) -> int:
    try:
        return _VALENCE_TABLE.data(symbol).atomic_number
    except ValueError:
        return 1000 + sum(map(ord, symbol))


def _dense_rank(keys: Sequence[Hashable]) -> list[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def atom_invariants(graph: MolecularGraph) -> list[tuple]:
    """Per-atom starting invariant: degree, atomic number, charge, H count, aromaticity."""
    hs = graph.hydrogens
    return [
        (graph.degree(i), _atomic_number(a.element), a.charge, hs[i], int(a.aromatic))
        for i, a in enumerate(graph.atoms)
    ]


def _refine(graph: MolecularGraph, ranks: list[int]) -> list[int]:
    n_classes = len(set(ranks))
    while True:
        keys = [
            (ranks[i], tuple(sorted((ranks[j], int(o)) for j, o in graph.adjacency[i])))
            for i in range(graph.n_atoms)
        ]
        new = _dense_rank(keys)
        n_new = len(set(new))
        if n_new == n_classes:
            return new
        ranks, n_classes = new, n_new


def canonical_rank(graph: MolecularGraph) -> list[int]:
    """Canonical rank of every atom; a permutation of ``0..n-1``.

    Ties left after refinement are broken at the lowest tied rank by
    promoting the tied atom with the smallest index, then refining again.
    For symmetric atoms the choice does not change the resulting labelling.
    """
    n = graph.n_atoms
    if n == 0:
        return []
    ranks = _refine(graph, _dense_rank(atom_invariants(graph)))
    while len(set(ranks)) < n:
        counts: dict[int, int] = {}
        for r in ranks:
            counts[r] = counts.get(r, 0) + 1
        tied = min(r for r, c in counts.items() if c > 1)
        chosen = min(i for i in range(n) if ranks[i] == tied)
        doubled = [2 * r for r in ranks]
        doubled[chosen] -= 1
        ranks = _refine(graph, _dense_rank(doubled))
    return ranks


def canonical_order(graph: MolecularGraph) -> list[int]:
    """Atom indices sorted by canonical rank."""
    ranks = canonical_rank(graph)
    order = [0] * len(ranks)
    for i, r in enumerate(ranks):
        order[r] = i
    return order


def canonicalize_graph(graph: MolecularGraph) -> MolecularGraph:
    """Relabel atoms into canonical-rank order."""
    return graph.permuted(canonical_order(graph))
