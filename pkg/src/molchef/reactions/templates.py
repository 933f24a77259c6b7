"""Reaction templates: parsing, application, and first-match prediction."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Sequence

from ..chem.canon import canonicalize_graph
from ..chem.graph import Atom, Bond, BondOrder, MolecularGraph, valence_violation
from ..chem.smiles import parse_smiles, write_smiles
from .pattern import BOND_SYMBOLS, PatternBond, PatternError, PatternGraph, match_subgraph, parse_pattern_atom

TEMPLATE_HEADER = "# molchef templates v1"


class NoMatch(LookupError):
    pass


class EditProducedInvalidGraph(RuntimeError):
    pass


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class Edit:
    op: str  # add_bond | remove_bond | set_charge | delete_atom
    a: int
    b: int | None = None
    order: BondOrder | None = None
    value: int | None = None


@dataclass(frozen=True)
class ReactionTemplate:
    name: str
    priority: int
    patterns: tuple[PatternGraph, ...]
    edits: tuple[Edit, ...]
    byproduct_labels: frozenset[int] = frozenset()
    example: tuple[tuple[str, ...], tuple[str, ...]] | None = None

    def __post_init__(self):
        owners: dict[int, int] = {}
        for p in self.patterns:
            for a in p.atoms:
                if a.map_label is not None:
                    if a.map_label in owners:
                        raise TemplateError(f"{self.name}: map label {a.map_label} used twice")
                    owners[a.map_label] = 1
        for e in self.edits:
            for label in (e.a, e.b):
                if label is not None and label not in owners:
                    raise TemplateError(f"{self.name}: edit refers to unknown map label {label}")
        for label in self.byproduct_labels:
            if label not in owners:
                raise TemplateError(f"{self.name}: unknown byproduct label {label}")


@dataclass(frozen=True)
class ProductBag:
    """Outcome of one reaction step.

    ``products`` are main products and ``byproducts`` leaving groups, each
    as canonical SMILES in sorted order. ``template`` is None when nothing
    reacted (products are then the input molecules) or the bag came from
    an external oracle. ``invalid`` marks an unusable prediction.
    """

    products: tuple[str, ...]
    byproducts: tuple[str, ...] = ()
    template: str | None = None
    reacted: bool = True
    invalid: bool = False
    error: str | None = None

    @property
    def primary(self) -> str | None:
        """Largest main product (most heavy atoms, then smallest SMILES)."""
        if not self.products:
            return None
        return min(self.products, key=lambda s: (-_heavy_atoms(s), s))

    def smiles(self) -> str:
        return ".".join(sorted(self.products + self.byproducts))


def _heavy_atoms(smiles: str) -> int:
    return sum(a.element != "H" for a in parse_smiles(smiles).atoms)


# ----------------------------------------------------------------- application

def _apply_edits(template: ReactionTemplate, union: MolecularGraph,
                 where: dict[int, int]) -> tuple[MolecularGraph, dict[int, int]]:
    """Edited graph plus the old-to-new atom index map."""
    atoms = list(union.atoms)
    bonds = {(b.begin, b.end): b.order for b in union.bonds}
    deleted: set[int] = set()
    touched: set[int] = set()

    def key(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    for e in template.edits:
        a = where[e.a]
        touched.add(a)
        if e.op == "add_bond":
            b = where[e.b]
            touched.add(b)
            if key(a, b) in bonds:
                raise EditProducedInvalidGraph(f"{template.name}: bond {e.a}-{e.b} already present")
            bonds[key(a, b)] = e.order
        elif e.op == "remove_bond":
            b = where[e.b]
            touched.add(b)
            if bonds.pop(key(a, b), None) is None:
                raise EditProducedInvalidGraph(f"{template.name}: no bond {e.a}-{e.b} to remove")
        elif e.op == "set_charge":
            atoms[a] = Atom(atoms[a].element, e.value, atoms[a].hcount, atoms[a].aromatic)
        elif e.op == "delete_atom":
            deleted.add(a)
    for i in touched:
        old = atoms[i]
        atoms[i] = Atom(old.element, old.charge, None, old.aromatic)
    keep = [i for i in range(len(atoms)) if i not in deleted]
    new_index = {old: k for k, old in enumerate(keep)}
    graph = MolecularGraph(
        tuple(atoms[i] for i in keep),
        tuple(Bond(new_index[a], new_index[b], o) for (a, b), o in sorted(bonds.items())
              if a in new_index and b in new_index),
    )
    bad = valence_violation(graph)
    if bad is not None:
        raise EditProducedInvalidGraph(f"{template.name}: valence violated at atom {bad}")
    return graph, new_index


def _split(template: ReactionTemplate, graph: MolecularGraph, labelled: set[int]) -> ProductBag:
    main, side = [], []
    for comp in graph.components():
        smi = write_smiles(graph.subgraph(comp))
        (side if labelled & set(comp) else main).append(smi)
    return ProductBag(tuple(sorted(main)), tuple(sorted(side)), template.name)


def _try_assignment(template: ReactionTemplate, members: Sequence[MolecularGraph]) -> ProductBag | None:
    per_pattern = [match_subgraph(p, g) for p, g in zip(template.patterns, members)]
    if any(not m for m in per_pattern):
        return None
    union = MolecularGraph.disjoint_union(members)
    offsets = list(itertools.accumulate([0] + [g.n_atoms for g in members]))
    where = {}
    for p, hits, off in zip(template.patterns, per_pattern, offsets):
        for label, pi in p.map_index().items():
            where[label] = hits[0][pi] + off
    product, new_index = _apply_edits(template, union, where)
    labelled = {new_index[where[l]] for l in template.byproduct_labels if where[l] in new_index}
    return _split(template, product, labelled)


def _sorted_members(bag: Sequence[MolecularGraph]) -> list[MolecularGraph]:
    canon = [canonicalize_graph(g) for g in bag]
    return sorted(canon, key=write_smiles)


def apply_template(template: ReactionTemplate, bag: Sequence[MolecularGraph]) -> ProductBag:
    """First successful application over member-to-pattern assignments.

    Members are canonicalized and sorted by SMILES, so the outcome does not
    depend on the input order. Raises NoMatch when nothing fits.
    """
    if len(bag) != len(template.patterns):
        raise NoMatch(f"{template.name} needs {len(template.patterns)} reactants, got {len(bag)}")
    members = _sorted_members(bag)
    for perm in itertools.permutations(range(len(members))):
        result = _try_assignment(template, [members[i] for i in perm])
        if result is not None:
            return result
    raise NoMatch(f"{template.name} does not match")


def predict_products(bag: Sequence[MolecularGraph], library: Sequence[ReactionTemplate] | None = None) -> ProductBag:
    """Apply the first matching template in (priority, name) order.

    Without a match the canonicalized input comes back with ``reacted=False``.
    """
    if not bag:
        raise ValueError("empty reactant bag")
    library = default_library() if library is None else library
    for template in sorted(library, key=lambda t: (t.priority, t.name)):
        try:
            return apply_template(template, bag)
        except NoMatch:
            continue
    return ProductBag(tuple(sorted(write_smiles(g) for g in bag)), (), None, reacted=False)


def predict_from_smiles(smiles: Sequence[str], library: Sequence[ReactionTemplate] | None = None) -> ProductBag:
    return predict_products([parse_smiles(s) for s in smiles], library)


# --------------------------------------------------------------------- parsing

def _parse_record(lines: list[tuple[int, str]]) -> ReactionTemplate:
    name, priority = None, None
    patterns, edits, byproducts, example = [], [], set(), None
    atoms, bonds = None, None
    section = None

    def close_pattern():
        nonlocal atoms, bonds
        if atoms is not None:
            order = sorted(atoms)
            if order != list(range(len(order))):
                raise TemplateError("pattern atom indices must be 0..n-1")
            patterns.append(PatternGraph(tuple(atoms[i] for i in order), tuple(bonds)))
        atoms, bonds = None, None

    for lineno, line in lines:
        head, _, rest = line.partition(" ")
        args = rest.split()
        try:
            if head == "TEMPLATE":
                name = rest.strip()
            elif head == "PRIORITY":
                priority = int(rest)
            elif head == "PATTERN":
                close_pattern()
                atoms, bonds, section = {}, [], "pattern"
            elif head == "ATOM" and section == "pattern":
                idx = int(args[0])
                if idx in atoms:
                    raise TemplateError(f"duplicate pattern atom {idx}")
                atoms[idx] = parse_pattern_atom(args[1:])
            elif head == "BOND" and section == "pattern":
                if len(args) != 3 or args[2] not in BOND_SYMBOLS:
                    raise TemplateError("expected BOND i j <-|=|#|:|~>")
                bonds.append(PatternBond(int(args[0]), int(args[1]), BOND_SYMBOLS[args[2]]))
            elif head == "EDITS":
                close_pattern()
                section = "edits"
            elif section == "edits" and head in ("add_bond", "remove_bond", "set_charge", "delete_atom"):
                if head == "add_bond":
                    order = BOND_SYMBOLS[args[2]]
                    if order is None:
                        raise TemplateError("added bonds need a definite order")
                    edits.append(Edit(head, int(args[0]), int(args[1]), order=order))
                elif head == "remove_bond":
                    edits.append(Edit(head, int(args[0]), int(args[1])))
                elif head == "set_charge":
                    edits.append(Edit(head, int(args[0]), value=int(args[1])))
                else:
                    edits.append(Edit(head, int(args[0])))
            elif head == "BYPRODUCT":
                close_pattern()
                byproducts.update(int(a) for a in args)
            elif head == "EXAMPLE":
                close_pattern()
                left, sep, right = rest.strip().partition(">>")
                if not sep:
                    raise TemplateError("EXAMPLE needs 'reactants>>products'")
                example = (tuple(left.split(".")), tuple(right.split(".")))
            else:
                raise TemplateError(f"unexpected line {line!r}")
        except (IndexError, KeyError, ValueError, PatternError) as exc:
            raise TemplateError(f"line {lineno}: {exc}") from None
    close_pattern()
    if name is None or priority is None or not patterns:
        raise TemplateError("template record needs TEMPLATE, PRIORITY and at least one PATTERN")
    if example is None:
        raise TemplateError(f"{name}: missing EXAMPLE line")
    return ReactionTemplate(name, priority, tuple(patterns), tuple(edits), frozenset(byproducts), example)


def validate_example(template: ReactionTemplate) -> None:
    """Apply the template to its own EXAMPLE and compare all product SMILES."""
    reactants, expected = template.example
    got = apply_template(template, [parse_smiles(s) for s in reactants])
    want = sorted(write_smiles(parse_smiles(s)) for s in expected)
    if sorted(got.products + got.byproducts) != want:
        raise TemplateError(f"{template.name}: EXAMPLE gives {got.smiles()}, expected {'.'.join(want)}")


def parse_templates(text: str, validate: bool = True) -> list[ReactionTemplate]:
    lines = text.splitlines()
    first = next((l.strip() for l in lines if l.strip()), "")
    if first != TEMPLATE_HEADER:
        raise TemplateError(f"template file must start with {TEMPLATE_HEADER!r}")
    records: list[list[tuple[int, str]]] = []
    current: list[tuple[int, str]] | None = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("TEMPLATE "):
            if current is not None:
                raise TemplateError(f"line {lineno}: TEMPLATE before END")
            current = []
        if current is None:
            raise TemplateError(f"line {lineno}: content outside a TEMPLATE record")
        if line == "END":
            records.append(current)
            current = None
        else:
            current.append((lineno, line))
    if current is not None:
        raise TemplateError("unterminated TEMPLATE record")
    templates = [_parse_record(r) for r in records]
    if len({t.name for t in templates}) != len(templates):
        raise TemplateError("duplicate template names")
    if validate:
        for t in templates:
            validate_example(t)
    return templates


@lru_cache(maxsize=1)
def _default() -> tuple[ReactionTemplate, ...]:
    text = resources.files("molchef.reactions").joinpath("data/templates.txt").read_text(encoding="utf-8")
    return tuple(parse_templates(text))


def default_library() -> list[ReactionTemplate]:
    return list(_default())


def load_templates(path) -> list[ReactionTemplate]:
    with open(path, encoding="utf-8") as fh:
        return parse_templates(fh.read())
