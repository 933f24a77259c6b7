"""Structural query graphs and a backtracking subgraph matcher."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

from ..chem.canon import canonical_rank
from ..chem.graph import BondOrder, MolecularGraph

MAX_PATTERN_ATOMS = 12

BOND_SYMBOLS = {"-": BondOrder.SINGLE, "=": BondOrder.DOUBLE, "#": BondOrder.TRIPLE,
                ":": BondOrder.AROMATIC, "~": None}


class PatternTooLarge(ValueError):
    pass


class PatternError(ValueError):
    pass


@dataclass(frozen=True)
class PatternAtom:
    """Query atom.

    ``element`` is a symbol (uppercase: aliphatic, lowercase: aromatic) or
    ``*`` for any atom. ``degrees`` constrains the heavy-atom degree.
    """

    element: str
    charge: int | None = None
    degrees: tuple[int, ...] | None = None
    map_label: int | None = None

    def accepts(self, graph: MolecularGraph, i: int) -> bool:
        atom = graph.atoms[i]
        if self.element != "*":
            if self.element[0].islower():
                if not atom.aromatic or atom.element.lower() != self.element:
                    return False
            elif atom.aromatic or atom.element != self.element:
                return False
        if self.charge is not None and atom.charge != self.charge:
            return False
        if self.degrees is not None and graph.heavy_degree(i) not in self.degrees:
            return False
        return True


@dataclass(frozen=True)
class PatternBond:
    begin: int
    end: int
    order: BondOrder | None  # None matches any bond

    def accepts(self, order: BondOrder | None) -> bool:
        return order is not None and (self.order is None or order == self.order)


@dataclass(frozen=True)
class PatternGraph:
    atoms: tuple[PatternAtom, ...]
    bonds: tuple[PatternBond, ...] = field(default=())

    def __post_init__(self):
        n = len(self.atoms)
        if n == 0:
            raise PatternError("pattern has no atoms")
        for b in self.bonds:
            if not (0 <= b.begin < n and 0 <= b.end < n) or b.begin == b.end:
                raise PatternError(f"bad pattern bond {b.begin}-{b.end}")
        if len(self._plan) != n:
            raise PatternError("pattern must be connected")

    @cached_property
    def _neighbors(self) -> list[list[tuple[int, PatternBond]]]:
        nbrs: list[list[tuple[int, PatternBond]]] = [[] for _ in self.atoms]
        for b in self.bonds:
            nbrs[b.begin].append((b.end, b))
            nbrs[b.end].append((b.begin, b))
        return nbrs

    @cached_property
    def _plan(self) -> list[tuple[int, int | None]]:
        """Breadth-first visiting order as (atom, already-placed parent)."""
        plan, seen = [(0, None)], {0}
        k = 0
        while k < len(plan):
            a = plan[k][0]
            for b, _ in sorted(self._neighbors[a], key=lambda nb: nb[0]):
                if b not in seen:
                    seen.add(b)
                    plan.append((b, a))
            k += 1
        return plan

    def map_index(self) -> dict[int, int]:
        return {a.map_label: i for i, a in enumerate(self.atoms) if a.map_label is not None}


def match_subgraph(pattern: PatternGraph, target: MolecularGraph) -> list[tuple[int, ...]]:
    """All injective embeddings of ``pattern`` into ``target``.

    Each result gives the target atom for every pattern atom. Results come
    in canonical-rank order of the anchor atom, and mappings covering the
    same atom and bond sets are reported once.
    """
    if len(pattern.atoms) > MAX_PATTERN_ATOMS:
        raise PatternTooLarge(f"pattern has {len(pattern.atoms)} atoms (max {MAX_PATTERN_ATOMS})")
    if target.n_atoms == 0:
        return []
    ranks = canonical_rank(target)
    by_rank = sorted(range(target.n_atoms), key=lambda i: ranks[i])
    plan = pattern._plan
    nbrs = pattern._neighbors
    n = len(plan)
    mapping: dict[int, int] = {}
    used: set[int] = set()
    results: list[tuple[int, ...]] = []
    seen_keys: set[tuple[frozenset, frozenset]] = set()

    def consistent(p: int, t: int) -> bool:
        if t in used or not pattern.atoms[p].accepts(target, t):
            return False
        for q, bond in nbrs[p]:
            if q in mapping and not bond.accepts(target.bond_order(t, mapping[q])):
                return False
        return True

    def extend(k: int) -> None:
        if k == n:
            result = tuple(mapping[i] for i in range(n))
            key = (frozenset(result),
                   frozenset(frozenset((result[b.begin], result[b.end])) for b in pattern.bonds))
            if key not in seen_keys:
                seen_keys.add(key)
                results.append(result)
            return
        p, parent = plan[k]
        if parent is None:
            candidates = by_rank
        else:
            candidates = sorted(target.neighbors(mapping[parent]), key=lambda i: ranks[i])
        for t in candidates:
            if consistent(p, t):
                mapping[p] = t
                used.add(t)
                extend(k + 1)
                del mapping[p]
                used.discard(t)

    extend(0)
    return results


def parse_pattern_atom(tokens: list[str]) -> PatternAtom:
    """``element [charge=q] [degree=d1,d2] [map=n]``."""
    if not tokens:
        raise PatternError("empty atom specification")
    element, opts = tokens[0], {}
    if element != "*" and not element.isalpha():
        raise PatternError(f"bad pattern element {element!r}")
    for tok in tokens[1:]:
        key, sep, value = tok.partition("=")
        if not sep or key not in ("charge", "degree", "map") or key in opts:
            raise PatternError(f"bad atom option {tok!r}")
        try:
            opts[key] = tuple(int(v) for v in value.split(",")) if key == "degree" else int(value)
        except ValueError:
            raise PatternError(f"bad atom option {tok!r}") from None
    return PatternAtom(element, opts.get("charge"), opts.get("degree"), opts.get("map"))
