"""Synthetic reaction corpus built from functionalized scaffolds.

Every reactant is a functional-group prefix attached to a scaffold, chosen
so that exactly one default template applies to each intended pair. Most
reactants form the vocabulary; a few are held out and only occur in the
unreachable test split.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..chem.smiles import canonical_smiles, parse_smiles
from ..reactions.templates import predict_products
from .io import ReactionRecord, write_reactions

# scaffolds free of groups any default template reacts with
ALKYL = (
    "C", "CC", "CCC", "C(C)C", "CCCC", "CC(C)C", "C(C)(C)C", "CCCCC", "CCCCCC", "C1CC1", "C1CCC1",
    "C1CCCC1", "C1CCCCC1", "CCOC", "CCSC", "CC(F)(F)F", "CCC#N", "CCc1ccccc1", "c1ccccc1",
    "c1ccc(C)cc1", "c1ccc(OC)cc1", "c1ccc(Cl)cc1", "c1ccncc1", "c1ccoc1", "c1ccsc1",
    "c1ccc2ccccc2c1", "Cc1ccccc1", "COc1ccccc1", "CC1CCCCC1", "CCCOCC",
)
ARYL = (
    "c1ccccc1", "c1ccc(C)cc1", "c1ccc(OC)cc1", "c1ccc(F)cc1", "c1ccncc1", "c1ccc2ccccc2c1",
    "c1cccc(C)c1", "c1ccc(Cl)cc1",
)

PREFIX = {
    "acid": "OC(=O)", "amine": "NC", "bromide": "BrC", "alcohol": "OC", "aldehyde": "O=C",
    "alkoxide": "[O-]C", "boronic": "OB(O)", "arylbromide": "Br",
}

# (class, partner class) pairs that react, with the template they trigger
PAIRINGS = (
    ("acid", "alcohol"), ("bromide", "alkoxide"), ("aldehyde", "amine"),
    ("acid", "amine"), ("bromide", "amine"),
)

# class sizes for the reference 60-candidate corpus
IN_VOCAB = {"amine": 16, "acid": 15, "bromide": 15, "aldehyde": 3, "alcohol": 3, "alkoxide": 2}
HELD_OUT = {"boronic": 2, "arylbromide": 2, "acid": 1, "amine": 1}


@dataclass
class ToyCorpus:
    train: list[ReactionRecord]
    valid: list[ReactionRecord]
    test_reachable: list[ReactionRecord]
    test_unreachable: list[ReactionRecord]
    held_out: list[str]

    def write(self, directory) -> dict[str, Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "train": out / "train.txt", "valid": out / "valid.txt",
            "test_reachable": out / "test_reachable.txt", "test_unreachable": out / "test_unreachable.txt",
            "test": out / "test.txt",
        }
        write_reactions(paths["train"], self.train)
        write_reactions(paths["valid"], self.valid)
        write_reactions(paths["test_reachable"], self.test_reachable)
        write_reactions(paths["test_unreachable"], self.test_unreachable)
        write_reactions(paths["test"], self.test_reachable + self.test_unreachable)
        return paths


def _scaled(sizes: dict[str, int], factor: float) -> dict[str, int]:
    return {k: max(1, int(round(v * factor))) for k, v in sizes.items()}


def _molecules(cls: str, n: int, rng: np.random.Generator, exclude: set[str]) -> list[str]:
    pool = ARYL if cls in ("boronic", "arylbromide") else ALKYL
    out = []
    for k in rng.permutation(len(pool)):
        smi = canonical_smiles(PREFIX[cls] + pool[k])
        if smi not in exclude and smi not in out:
            out.append(smi)
        if len(out) == n:
            return out
    raise ValueError(f"scaffold pool too small for {n} {cls} reactants")


def _react(a: str, b: str) -> ReactionRecord:
    result = predict_products([parse_smiles(a), parse_smiles(b)])
    if not result.reacted or result.invalid:
        raise AssertionError(f"toy pair {a} + {b} does not react")
    return ReactionRecord(tuple(sorted((a, b))), result.products)


def _balanced_pairs(left: list[str], right: list[str], per_left: int, counts: Counter,
                    rng: np.random.Generator) -> list[tuple[str, str]]:
    """``per_left`` partners for each left molecule, favouring the least used partners."""
    pairs = []
    for a in [left[i] for i in rng.permutation(len(left))]:
        tie = rng.permutation(len(right))
        chosen = sorted(range(len(right)), key=lambda j: (counts[right[j]], tie[j]))[:per_left]
        for j in sorted(chosen):
            pairs.append((a, right[j]))
            counts[right[j]] += 1
        counts[a] += per_left
    return pairs


def gen_toy_dataset(seed: int = 0, n_reactant_candidates: int = 60, n_reactions: int = 500,
                    min_count: int = 15) -> ToyCorpus:
    """Deterministic toy corpus; the defaults give about 500 training reactions.

    Acids and bromides get enough amine partners that every vocabulary
    reactant occurs in at least ``min_count`` training reactions.
    """
    rng = np.random.default_rng([seed, 7])
    factor = n_reactant_candidates / 60.0
    in_sizes, held_sizes = _scaled(IN_VOCAB, factor), _scaled(HELD_OUT, factor)
    mols: dict[str, list[str]] = {}
    used: set[str] = set()
    for cls in sorted(set(in_sizes) | set(held_sizes)):
        n = in_sizes.get(cls, 0) + held_sizes.get(cls, 0)
        mols[cls] = _molecules(cls, n, rng, used)
        used.update(mols[cls])
    vocab_mols = {cls: mols[cls][:in_sizes.get(cls, 0)] for cls in mols}
    held = {cls: mols[cls][in_sizes.get(cls, 0):] for cls in mols}

    counts: Counter = Counter()
    train_pairs: list[tuple[str, str]] = []
    spare: list[tuple[str, str]] = []
    # small classes: every pair goes to training except one held back per aldehyde
    for a_cls, b_cls in PAIRINGS[:3]:
        for a in vocab_mols[a_cls]:
            partners = vocab_mols[b_cls]
            skip = partners[int(rng.integers(len(partners)))] if a_cls == "aldehyde" else None
            for b in partners:
                if b == skip:
                    spare.append((a, b))
                else:
                    train_pairs.append((a, b))
                    counts[a] += 1
                    counts[b] += 1
    remaining = max(0, n_reactions - len(train_pairs))
    n_acid, n_bromide = len(vocab_mols["acid"]), len(vocab_mols["bromide"])
    floor = {cls: max(0, min_count - min(counts[m] for m in vocab_mols[cls])) for cls in ("acid", "bromide")}
    per_acid = min(len(vocab_mols["amine"]), max(1, floor["acid"], round(remaining / 2 / n_acid)))
    per_bromide = min(len(vocab_mols["amine"]),
                      max(1, floor["bromide"], round((remaining - per_acid * n_acid) / n_bromide)))
    for a_cls, per in (("acid", per_acid), ("bromide", per_bromide)):
        chosen = _balanced_pairs(vocab_mols[a_cls], vocab_mols["amine"], per, counts, rng)
        train_pairs.extend(chosen)
        taken = set(chosen)
        spare.extend((a, b) for a in vocab_mols[a_cls] for b in vocab_mols["amine"] if (a, b) not in taken)

    train = [_react(a, b) for a, b in train_pairs]
    spare_records = [_react(a, b) for a, b in spare]
    order = rng.permutation(len(spare_records))
    n_valid = len(order) // 2
    valid = [spare_records[i] for i in sorted(order[:n_valid])]
    test_reachable = [spare_records[i] for i in sorted(order[n_valid:])]

    unreachable_pairs = [(a, b) for a in held["boronic"] for b in held["arylbromide"]]
    for a in held.get("acid", []):
        unreachable_pairs += [(a, b) for b in vocab_mols["amine"]]
    for a in held.get("amine", []):
        unreachable_pairs += [(b, a) for b in vocab_mols["acid"] + vocab_mols["bromide"]]
    test_unreachable = [_react(a, b) for a, b in unreachable_pairs]

    order = rng.permutation(len(train))
    train = [train[i] for i in order]
    held_out = sorted(s for v in held.values() for s in v)
    return ToyCorpus(train, valid, test_reachable, test_unreachable, held_out)
