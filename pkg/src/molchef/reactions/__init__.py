"""Template-based reaction prediction and an external predictor channel."""

from .oracle import ExternalOracle, OracleReturnedUnparseable, OracleUnavailable
from .pattern import PatternAtom, PatternBond, PatternGraph, PatternTooLarge, match_subgraph
from .templates import (
    EditProducedInvalidGraph, NoMatch, ProductBag, ReactionTemplate, TemplateError, apply_template,
    default_library, load_templates, parse_templates, predict_from_smiles, predict_products,
)

__all__ = [
    "EditProducedInvalidGraph", "ExternalOracle", "NoMatch", "OracleReturnedUnparseable", "OracleUnavailable",
    "PatternAtom", "PatternBond", "PatternGraph", "PatternTooLarge", "ProductBag", "ReactionTemplate",
    "TemplateError", "apply_template", "default_library", "load_templates", "match_subgraph",
    "parse_templates", "predict_from_smiles", "predict_products",
]
