"""Generation metrics over sampled product bags and a Fréchet embedding distance."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .chem.graph import check_valence
from .chem.smiles import parse_smiles, write_smiles
from .embed import GGNN, make_batch
from .numerics.params import ParameterStore
from .numerics.stats import psd_matrix_sqrt
from .reactions.templates import ProductBag


class EmptyInput(ValueError):
    pass


class NoValidRecords(ValueError):
    pass


class EmptySet(ValueError):
    pass


@dataclass(frozen=True)
class SampleRecord:
    """One decoded latent sample and what the reaction step made of it."""

    z: np.ndarray | None
    bag: tuple[str, ...]  # reactant SMILES; empty for an empty decode
    products: tuple[str, ...]  # raw product strings as reported
    valid_products: tuple[str, ...]  # canonical SMILES of the valid ones, in report order

    @property
    def valid(self) -> bool:
        return bool(self.valid_products)

    @property
    def empty(self) -> bool:
        return not self.bag


def _canonical_or_none(smiles: str) -> str | None:
    try:
        g = parse_smiles(smiles)
        check_valence(g)
    except ValueError:
        return None
    return write_smiles(g)


def make_record(z, bag_smiles: Sequence[str], products: ProductBag | Sequence[str] | None) -> SampleRecord:
    """Build a record; pass ``products=None`` for an empty decode."""
    if products is None:
        raw: tuple[str, ...] = ()
    elif isinstance(products, ProductBag):
        raw = () if products.invalid else products.products
    else:
        raw = tuple(products)
    valid = tuple(c for c in (_canonical_or_none(s) for s in raw) if c is not None)
    return SampleRecord(None if z is None else np.asarray(z, dtype=np.float64), tuple(bag_smiles), raw, valid)


def validity(records: Sequence[SampleRecord]) -> float:
    """Fraction of records with at least one valid product; empty decodes count as invalid."""
    if not records:
        raise EmptyInput("no records")
    return sum(r.valid for r in records) / len(records)


def _valid_only(records: Sequence[SampleRecord]) -> list[SampleRecord]:
    valid = [r for r in records if r.valid]
    if not valid:
        raise NoValidRecords("no valid records")
    return valid


def uniqueness(records: Sequence[SampleRecord]) -> float:
    """Share of valid records adding a product not seen earlier in sample order."""
    valid = _valid_only(records)
    seen: set[str] = set()
    unique = 0
    for r in valid:
        fresh = set(r.valid_products) - seen
        unique += bool(fresh)
        seen.update(r.valid_products)
    return unique / len(valid)


def novelty(records: Sequence[SampleRecord], training: Iterable[str]) -> float:
    """Share of valid records with a product outside the training molecule set."""
    valid = _valid_only(records)
    known = set(training)
    return sum(any(p not in known for p in r.valid_products) for r in valid) / len(valid)


# ----------------------------------------------------------- Fréchet distance

def gaussian_moments(embeddings: np.ndarray, shrink: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Mean and sample covariance; adds ``shrink * I`` when there are at most d points."""
    x = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    n, d = x.shape
    if n == 0:
        raise EmptySet("cannot fit moments to an empty set")
    mu = x.mean(axis=0)
    cov = np.zeros((d, d)) if n == 1 else np.cov(x, rowvar=False).reshape(d, d)
    if n < d + 1:
        cov = cov + shrink * np.eye(d)
    return mu, cov


def frechet_from_moments(mu1, cov1, mu2, cov2) -> float:
    """Squared 2-Wasserstein distance between two Gaussians."""
    mu1, mu2 = np.atleast_1d(mu1).astype(np.float64), np.atleast_1d(mu2).astype(np.float64)
    cov1, cov2 = np.atleast_2d(cov1).astype(np.float64), np.atleast_2d(cov2).astype(np.float64)
    root1 = psd_matrix_sqrt(cov1)
    cross = psd_matrix_sqrt(root1 @ cov2 @ root1)
    diff = mu1 - mu2
    d2 = float(diff @ diff + np.trace(cov1) + np.trace(cov2) - 2.0 * np.trace(cross))
    return max(d2, 0.0)


def frechet_from_embeddings(a: np.ndarray, b: np.ndarray) -> float:
    return frechet_from_moments(*gaussian_moments(a), *gaussian_moments(b))


def frechet_embedding_distance(molecules_a: Sequence[str], molecules_b: Sequence[str], ggnn: GGNN,
                               store: ParameterStore) -> float:
    """Fréchet distance between two molecule sets in a frozen graph-network embedding."""
    if not molecules_a or not molecules_b:
        raise EmptySet("both molecule sets must be non-empty")

    def embed(smiles: Sequence[str]) -> np.ndarray:
        return ggnn.embed_batch(make_batch([parse_smiles(s) for s in smiles], ggnn.table), store).value

    return frechet_from_embeddings(embed(molecules_a), embed(molecules_b))


# ------------------------------------------------------------------ reports

def render_report(values: dict[str, object]) -> str:
    lines = []
    for key, value in values.items():
        text = f"{value:.6f}" if isinstance(value, float) else str(value)
        lines.append(f"{key}={text}")
    return "\n".join(lines) + "\n"


def write_records_csv(path, records: Sequence[SampleRecord], training: Iterable[str] | None = None) -> None:
    known = None if training is None else set(training)
    seen: set[str] = set()
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "bag", "products", "valid", "unique", "novel"])
        for i, r in enumerate(records):
            unique = r.valid and bool(set(r.valid_products) - seen)
            seen.update(r.valid_products)
            novel = "NA" if known is None else int(r.valid and any(p not in known for p in r.valid_products))
            w.writerow([i, ".".join(r.bag), ".".join(r.valid_products), int(r.valid), int(unique), novel])


def read_records_csv(path) -> list[SampleRecord]:
    """Records from a CSV written by :func:`write_records_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [make_record(None, [s for s in row["bag"].split(".") if s],
                        [s for s in row["products"].split(".") if s]) for row in rows]
