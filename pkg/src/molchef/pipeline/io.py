"""Reaction files, vocabulary construction, and the binary weight format."""

from __future__ import annotations

import re
import struct
import zlib
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..chem.graph import check_valence
from ..chem.smiles import parse_smiles, write_smiles
from ..numerics.params import ParameterStore
from ..numerics.tensor import ShapeMismatch
from ..wae.vocab import Bag, ReactantVocabulary


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyVocabulary(ValueError):
    pass


@dataclass(frozen=True)
class ReactionRecord:
    reactants: tuple[str, ...]  # canonical, sorted
    products: tuple[str, ...]
    line: int = 0

    def render(self) -> str:
        return ".".join(self.reactants) + ">>" + ".".join(self.products)


def _canonical_side(text: str) -> tuple[str, ...]:
    out = []
    for part in text.split("."):
        g = parse_smiles(part)
        check_valence(g)
        out.append(write_smiles(g))
    return tuple(sorted(out))


_COMMENT = re.compile(r"(^|\s)#.*$")


def parse_reactions(text: str) -> list[ReactionRecord]:
    """``R1.R2>>P1.P2`` per line; blank lines and ``#`` comments are skipped.

    A comment starts at a ``#`` opening the line or following whitespace, so
    triple bonds inside SMILES are left alone.
    """
    records = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _COMMENT.sub("", raw).strip()
        if not line:
            continue
        left, sep, right = line.partition(">>")
        if not sep or not left or not right:
            raise ParseError(lineno, "expected 'reactants>>products'")
        try:
            records.append(ReactionRecord(_canonical_side(left), _canonical_side(right), lineno))
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
    return records


def render_reactions(records: Iterable[ReactionRecord]) -> str:
    return "".join(r.render() + "\n" for r in records)


def read_reactions(path) -> list[ReactionRecord]:
    return parse_reactions(Path(path).read_text(encoding="utf-8"))


def write_reactions(path, records: Iterable[ReactionRecord]) -> None:
    Path(path).write_text(render_reactions(records), encoding="utf-8")


def build_vocab(records: Sequence[ReactionRecord], min_count: int = 15) -> ReactantVocabulary:
    """Reactants seen in at least ``min_count`` reactions, most frequent first.

    A reactant repeated inside one reaction counts once for that reaction.
    """
    counts = Counter(s for r in records for s in set(r.reactants))
    kept = sorted((s for s, c in counts.items() if c >= min_count), key=lambda s: (-counts[s], s))
    if not kept:
        raise EmptyVocabulary(f"no reactant occurs in {min_count} or more reactions")
    return ReactantVocabulary(tuple(kept), tuple(counts[s] for s in kept))


def reachable(records: Sequence[ReactionRecord], vocab: ReactantVocabulary,
              max_size: int = 5) -> tuple[list[ReactionRecord], list[Bag]]:
    """Reactions whose reactants all lie in the vocabulary, with their bags."""
    kept, bags = [], []
    for r in records:
        if len(r.reactants) <= max_size and all(s in vocab for s in r.reactants):
            kept.append(r)
            bags.append(vocab.bag(r.reactants))
    return kept, bags


def read_vocab(path) -> ReactantVocabulary:
    return ReactantVocabulary.parse(Path(path).read_text(encoding="utf-8"))


def write_vocab(path, vocab: ReactantVocabulary) -> None:
    Path(path).write_text(vocab.render(), encoding="utf-8")


# ---------------------------------------------------------------- weights

MAGIC = b"MCHEF"
VERSION = 1


class WeightFileError(ValueError):
    pass


class BadMagic(WeightFileError):
    pass


class VersionMismatch(WeightFileError):
    pass


class TruncatedFile(WeightFileError):
    pass


class ChecksumMismatch(WeightFileError):
    pass


def encode_weights(arrays: Mapping[str, np.ndarray]) -> bytes:
    """Serialize tensors in sorted name order."""
    parts = [MAGIC, bytes([VERSION]), struct.pack("<I", len(arrays))]
    for name in sorted(arrays):
        value = np.asarray(arrays[name], dtype=np.float64)
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", value.ndim))
        parts.append(struct.pack(f"<{value.ndim}I", *value.shape))
        parts.append(value.astype("<f8").tobytes(order="C"))
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def decode_weights(data: bytes) -> dict[str, np.ndarray]:
    if len(data) < len(MAGIC) or data[:len(MAGIC)] != MAGIC:
        raise BadMagic("not a weight file")
    pos = len(MAGIC)

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(data) - 4:
            raise TruncatedFile(f"weight file ends early at byte {len(data)}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if len(data) < pos + 1:
        raise TruncatedFile("weight file ends before the version byte")
    if data[pos] != VERSION:
        raise VersionMismatch(f"weight format version {data[pos]}, expected {VERSION}")
    pos += 1
    (count,) = struct.unpack("<I", take(4))
    out = {}
    for _ in range(count):
        (length,) = struct.unpack("<H", take(2))
        name = take(length).decode("utf-8")
        (rank,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        size = int(np.prod(shape, dtype=np.int64))
        out[name] = np.frombuffer(take(8 * size), dtype="<f8").astype(np.float64).reshape(shape)
    if pos != len(data) - 4:
        raise TruncatedFile("unexpected bytes after the last tensor")
    (crc,) = struct.unpack("<I", data[-4:])
    if crc != zlib.crc32(data[:-4]):
        raise ChecksumMismatch("weight file checksum mismatch")
    return out


def save_weights(store: ParameterStore, path) -> None:
    Path(path).write_bytes(encode_weights(store.arrays()))


def load_weights(path, expected: ParameterStore | None = None) -> ParameterStore:
    """Read a weight file; with ``expected`` every name and shape must agree."""
    arrays = decode_weights(Path(path).read_bytes())
    if expected is not None:
        want = {n: expected[n].shape for n in expected.names()}
        got = {n: a.shape for n, a in arrays.items()}
        if want != got:
            diff = sorted(set(want.items()) ^ set(got.items()))
            raise ShapeMismatch(f"weight file does not fit the configured model: {diff[:4]}")
    store = ParameterStore()
    for name in sorted(arrays):
        store.add(name, arrays[name])
    return store
