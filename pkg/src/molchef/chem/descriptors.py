"""Simple molecular descriptors and a surrogate drug-likeness score."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .graph import BondOrder, MolecularGraph, _VALENCE_TABLE


@dataclass(frozen=True)
class DescriptorRecord:
    molecular_weight: float
    ring_count: int
    h_bond_donors: int
    h_bond_acceptors: int
    rotatable_bonds: int
    aromatic_atom_fraction: float
    heteroatom_fraction: float


def _ring_bonds(graph: MolecularGraph) -> set[tuple[int, int]]:
    """Bonds lying on a cycle (i.e. not bridges), via Tarjan lowlinks."""
    n = graph.n_atoms
    disc = [-1] * n
    low = [0] * n
    bridges: set[tuple[int, int]] = set()
    counter = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack = [(root, -1, iter(graph.neighbors(root)))]
        while stack:
            v, parent, it = stack[-1]
            advanced = False
            for w in it:
                if w == parent:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = counter
                    counter += 1
                    stack.append((w, v, iter(graph.neighbors(w))))
                    advanced = True
                    break
                low[v] = min(low[v], disc[w])
            if not advanced:
                stack.pop()
                if parent >= 0:
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        bridges.add((min(v, parent), max(v, parent)))
    return {(b.begin, b.end) for b in graph.bonds} - bridges


def descriptors(graph: MolecularGraph) -> DescriptorRecord:
    hs = graph.hydrogens
    h_mass = _VALENCE_TABLE.data("H").mass
    # fsum is exactly rounded, so the weight does not depend on atom order
    mw = math.fsum(_VALENCE_TABLE.data(a.element).mass + hs[i] * h_mass for i, a in enumerate(graph.atoms))
    heavy = [i for i, a in enumerate(graph.atoms) if a.element != "H"]
    n_heavy = len(heavy)
    rings = len(graph.bonds) - graph.n_atoms + len(graph.components())
    donors = sum(1 for i in heavy if graph.atoms[i].element in ("N", "O") and hs[i] >= 1)
    acceptors = sum(1 for i in heavy if graph.atoms[i].element in ("N", "O"))
    ring_bonds = _ring_bonds(graph)
    rotatable = 0
    for b in graph.bonds:
        if b.order is not BondOrder.SINGLE or (b.begin, b.end) in ring_bonds:
            continue
        if graph.atoms[b.begin].element == "H" or graph.atoms[b.end].element == "H":
            continue
        if graph.heavy_degree(b.begin) >= 2 and graph.heavy_degree(b.end) >= 2:
            rotatable += 1
    aromatic = sum(1 for i in heavy if graph.atoms[i].aromatic)
    hetero = sum(1 for i in heavy if graph.atoms[i].element != "C")
    return DescriptorRecord(
        molecular_weight=mw,
        ring_count=rings,
        h_bond_donors=donors,
        h_bond_acceptors=acceptors,
        rotatable_bonds=rotatable,
        aromatic_atom_fraction=aromatic / n_heavy if n_heavy else 0.0,
        heteroatom_fraction=hetero / n_heavy if n_heavy else 0.0,
    )


# Desirability functions.  Each maps a descriptor to (0, 1]; one-sided
# terms are 1 up to their ideal limit and decay as a half-Gaussian past it.
MW_CENTER, MW_WIDTH = 300.0, 150.0
DONOR_LIMIT, DONOR_WIDTH = 5, 2.5
ACCEPTOR_LIMIT, ACCEPTOR_WIDTH = 10, 5.0
ROTATABLE_LIMIT, ROTATABLE_WIDTH = 8, 4.0
AROMATIC_CENTER, AROMATIC_WIDTH = 0.3, 0.3
DESIRABILITY_FLOOR = 1e-3


def _gaussian(x: float, center: float, width: float) -> float:
    return math.exp(-0.5 * ((x - center) / width) ** 2)


def _upper_limit(x: float, limit: float, width: float) -> float:
    return 1.0 if x <= limit else _gaussian(x, limit, width)


def desirabilities(record: DescriptorRecord) -> tuple[float, ...]:
    raw = (
        _gaussian(record.molecular_weight, MW_CENTER, MW_WIDTH),
        _upper_limit(record.h_bond_donors, DONOR_LIMIT, DONOR_WIDTH),
        _upper_limit(record.h_bond_acceptors, ACCEPTOR_LIMIT, ACCEPTOR_WIDTH),
        _upper_limit(record.rotatable_bonds, ROTATABLE_LIMIT, ROTATABLE_WIDTH),
        _gaussian(record.aromatic_atom_fraction, AROMATIC_CENTER, AROMATIC_WIDTH),
    )
    return tuple(min(1.0, max(DESIRABILITY_FLOOR, d)) for d in raw)


def surrogate_qed(graph: MolecularGraph) -> float:
    """Geometric mean of the five clamped desirabilities; in [1e-3, 1]."""
    ds = desirabilities(descriptors(graph))
    return math.exp(sum(math.log(d) for d in ds) / len(ds))
