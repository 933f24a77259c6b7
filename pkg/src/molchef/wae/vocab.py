"""Reactant vocabulary and reactant bags."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..chem.graph import MolecularGraph, check_valence
from ..chem.smiles import parse_smiles, write_smiles

Bag = tuple[int, ...]  # sorted vocabulary indices, duplicates allowed


class EmptyBag(ValueError):
    pass


class VocabularyError(ValueError):
    pass


def make_bag(indices: Iterable[int], vocab_size: int | None = None) -> Bag:
    bag = tuple(sorted(int(i) for i in indices))
    if not bag:
        raise EmptyBag("reactant bag is empty")
    if vocab_size is not None and (bag[0] < 0 or bag[-1] >= vocab_size):
        raise VocabularyError(f"bag {bag} has indices outside a vocabulary of {vocab_size}")
    return bag


@dataclass
class ReactantVocabulary:
    """Ordered pool of canonical reactant SMILES with occurrence counts."""

    smiles: tuple[str, ...]
    counts: tuple[int, ...]
    graphs: tuple[MolecularGraph, ...] = field(init=False, repr=False)
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.smiles = tuple(self.smiles)
        self.counts = tuple(self.counts)
        if len(self.smiles) != len(self.counts):
            raise VocabularyError("one count per entry required")
        graphs = []
        for s in self.smiles:
            g = parse_smiles(s)
            check_valence(g)
            if write_smiles(g) != s:
                raise VocabularyError(f"{s!r} is not in canonical form")
            graphs.append(g)
        if len(set(self.smiles)) != len(self.smiles):
            raise VocabularyError("duplicate vocabulary entries")
        self.graphs = tuple(graphs)
        self.index = {s: i for i, s in enumerate(self.smiles)}

    def __len__(self) -> int:
        return len(self.smiles)

    def __contains__(self, smiles: str) -> bool:
        return smiles in self.index

    def bag(self, smiles: Sequence[str]) -> Bag:
        """Bag from canonical SMILES; KeyError if any is out of vocabulary."""
        return make_bag((self.index[s] for s in smiles), len(self))

    def bag_smiles(self, bag: Bag) -> list[str]:
        return [self.smiles[i] for i in bag]

    def bag_graphs(self, bag: Bag) -> list[MolecularGraph]:
        return [self.graphs[i] for i in bag]

    def render(self) -> str:
        return "".join(f"{s}\t{c}\n" for s, c in zip(self.smiles, self.counts))

    @classmethod
    def parse(cls, text: str) -> "ReactantVocabulary":
        smiles, counts = [], []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise VocabularyError(f"vocabulary line {lineno}: expected 'smiles<TAB>count'")
            smiles.append(parts[0])
            counts.append(int(parts[1]))
        return cls(tuple(smiles), tuple(counts))
