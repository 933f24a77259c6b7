"""Molecular graph data model and valence rules."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Iterable, Sequence

from .elements import DEFAULT_TABLE, ElementTable, UnsupportedElement, _builtin_records

# valence lookups use every element in the resource, not only the supported
# subset, so that isoelectronic shifts (e.g. [Br-] -> Kr) resolve
_VALENCE_TABLE = ElementTable(_builtin_records(), [r.symbol for r in _builtin_records()])

ORGANIC_SUBSET = frozenset({"B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I"})
AROMATIC_SYMBOLS = frozenset({"B", "C", "N", "O", "P", "S", "Se", "As"})


class ValenceError(ValueError):
    def __init__(self, atom_index: int, message: str = ""):
        self.atom_index = atom_index
        super().__init__(message or f"valence violated at atom {atom_index}")


class GraphError(ValueError):
    """Structurally malformed graph (self-loop, duplicate bond, bad index)."""


class BondOrder(IntEnum):
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def valence(self) -> float:
        return 1.5 if self is BondOrder.AROMATIC else float(self.value)


@dataclass(frozen=True)
class Atom:
    element: str
    charge: int = 0
    hcount: int | None = None  # None: implicit, derived from the valence table
    aromatic: bool = False

    def __post_init__(self):
        if not -4 <= self.charge <= 4:
            raise GraphError(f"charge {self.charge} outside [-4, 4]")
        if self.hcount is not None and self.hcount < 0:
            raise GraphError("negative hydrogen count")


@dataclass(frozen=True)
class Bond:
    begin: int
    end: int
    order: BondOrder

    def other(self, i: int) -> int:
        return self.end if i == self.begin else self.begin


@dataclass(frozen=True, eq=True)
class MolecularGraph:
    """Undirected simple graph of atoms and typed bonds.

    Bonds are stored with ``begin < end`` and sorted, so two graphs built
    from the same atoms and bond set compare equal.
    """

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...] = field(default=())

    def __post_init__(self):
        atoms = tuple(self.atoms)
        n = len(atoms)
        seen = set()
        norm = []
        for b in self.bonds:
            if not isinstance(b, Bond):
                b = Bond(*b)
            i, j = b.begin, b.end
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"bond ({i}, {j}) references a missing atom")
            if i == j:
                raise GraphError(f"self-loop on atom {i}")
            if i > j:
                i, j = j, i
            if (i, j) in seen:
                raise GraphError(f"duplicate bond ({i}, {j})")
            seen.add((i, j))
            norm.append(Bond(i, j, BondOrder(b.order)))
        norm.sort(key=lambda b: (b.begin, b.end))
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "bonds", tuple(norm))

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, BondOrder], ...], ...]:
        adj: list[list[tuple[int, BondOrder]]] = [[] for _ in self.atoms]
        for b in self.bonds:
            adj[b.begin].append((b.end, b.order))
            adj[b.end].append((b.begin, b.order))
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def _bond_index(self) -> dict[tuple[int, int], BondOrder]:
        return {(b.begin, b.end): b.order for b in self.bonds}

    def bond_order(self, i: int, j: int) -> BondOrder | None:
        if i > j:
            i, j = j, i
        return self._bond_index.get((i, j))

    def neighbors(self, i: int) -> list[int]:
        return [j for j, _ in self.adjacency[i]]

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def heavy_degree(self, i: int) -> int:
        return sum(1 for j, _ in self.adjacency[i] if self.atoms[j].element != "H")

    @cached_property
    def hydrogens(self) -> tuple[int, ...]:
        """Attached hydrogen count per atom (explicit count or implicit)."""
        return tuple(implicit_hydrogens(self, i) for i in range(len(self.atoms)))

    def bond_valence(self, i: int) -> float:
        return sum(o.valence for _, o in self.adjacency[i])

    def components(self) -> list[list[int]]:
        comp = [-1] * len(self.atoms)
        out = []
        for start in range(len(self.atoms)):
            if comp[start] >= 0:
                continue
            stack, members = [start], []
            comp[start] = len(out)
            while stack:
                a = stack.pop()
                members.append(a)
                for b in self.neighbors(a):
                    if comp[b] < 0:
                        comp[b] = len(out)
                        stack.append(b)
            out.append(sorted(members))
        return out

    def subgraph(self, indices: Sequence[int]) -> "MolecularGraph":
        remap = {old: new for new, old in enumerate(indices)}
        bonds = [Bond(remap[b.begin], remap[b.end], b.order)
                 for b in self.bonds if b.begin in remap and b.end in remap]
        return MolecularGraph(tuple(self.atoms[i] for i in indices), tuple(bonds))

    def permuted(self, order: Sequence[int]) -> "MolecularGraph":
        """New graph whose atom ``k`` is this graph's atom ``order[k]``."""
        if sorted(order) != list(range(len(self.atoms))):
            raise GraphError("not a permutation")
        return self.subgraph(order)

    def with_resolved_hydrogens(self) -> "MolecularGraph":
        """Copy with every atom's hydrogen count made explicit."""
        atoms = tuple(Atom(a.element, a.charge, h, a.aromatic) for a, h in zip(self.atoms, self.hydrogens))
        return MolecularGraph(atoms, self.bonds)

    @classmethod
    def disjoint_union(cls, graphs: Iterable["MolecularGraph"]) -> "MolecularGraph":
        atoms: list[Atom] = []
        bonds: list[Bond] = []
        for g in graphs:
            off = len(atoms)
            atoms.extend(g.atoms)
            bonds.extend(Bond(b.begin + off, b.end + off, b.order) for b in g.bonds)
        return cls(tuple(atoms), tuple(bonds))


def allowed_valences(atom: Atom) -> tuple[int, ...] | None:
    try:
        return _VALENCE_TABLE.allowed_valences(atom.element, atom.charge)
    except UnsupportedElement:
        return None


def _valence_parts(graph: MolecularGraph, i: int) -> tuple[int, int]:
    """(sum of non-aromatic bond orders, number of aromatic bonds)."""
    other = 0
    n_arom = 0
    for _, o in graph.adjacency[i]:
        if o is BondOrder.AROMATIC:
            n_arom += 1
        else:
            other += int(o)
    return other, n_arom


def implicit_hydrogens(graph: MolecularGraph, i: int, ignore_explicit: bool = False) -> int:
    """Hydrogens on atom ``i``; with ``ignore_explicit`` the count a bare
    organic-subset atom would get in this position."""
    atom = graph.atoms[i]
    if atom.hcount is not None and not ignore_explicit:
        return atom.hcount
    valences = allowed_valences(atom)
    if valences is None:
        return 0
    other, n_arom = _valence_parts(graph, i)
    if atom.aromatic or n_arom:
        # aromatic atoms use their lowest valence; one unit goes to the pi system
        used = other + n_arom + 1
        return max(0, valences[0] - used)
    for v in valences:
        if v >= other:
            return v - other
    return 0


def valence_violation(graph: MolecularGraph) -> int | None:
    """Index of the first atom exceeding its maximum valence, else None.

    Aromatic bonds count one sigma unit each here; the extra pi unit is
    optional so that pyrrole-type nitrogens and furan oxygens pass.
    """
    for i, atom in enumerate(graph.atoms):
        valences = allowed_valences(atom)
        if valences is None:
            continue
        other, n_arom = _valence_parts(graph, i)
        total = other + n_arom + graph.hydrogens[i]
        if total > max(valences):
            return i
    return None


def check_valence(graph: MolecularGraph) -> None:
    idx = valence_violation(graph)
    if idx is not None:
        raise ValenceError(idx)


def require_supported(graph: MolecularGraph, table: ElementTable = DEFAULT_TABLE) -> None:
    for a in graph.atoms:
        if a.element not in table:
            raise UnsupportedElement(a.element)
