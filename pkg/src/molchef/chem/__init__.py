from .canon import canonical_order, canonical_rank, canonicalize_graph
from .elements import DEFAULT_ELEMENTS, DEFAULT_TABLE, ElementTable, UnsupportedElement, load_table
from .graph import Atom, Bond, BondOrder, GraphError, MolecularGraph, ValenceError, check_valence, valence_violation
from .smiles import SmilesSyntaxError, canonical_smiles, parse_smiles, write_smiles

__all__ = [
    "Atom", "Bond", "BondOrder", "DEFAULT_ELEMENTS", "DEFAULT_TABLE", "ElementTable", "GraphError",
    "MolecularGraph", "SmilesSyntaxError", "UnsupportedElement", "ValenceError", "canonical_order",
    "canonical_rank", "canonical_smiles", "canonicalize_graph", "check_valence", "load_table",
    "parse_smiles", "valence_violation", "write_smiles",
]

from .descriptors import DescriptorRecord, descriptors, surrogate_qed  # noqa: E402
from .features import atom_features, feature_length, feature_matrix  # noqa: E402

__all__ += ["DescriptorRecord", "atom_features", "descriptors", "feature_length", "feature_matrix", "surrogate_qed"]
