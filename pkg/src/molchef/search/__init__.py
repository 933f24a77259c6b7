"""Latent-space property optimization and product-to-reactant retrosynthesis."""

from .optimize import OptimizationTrace, TraceEntry, local_optimize, property_gradient, random_walk, score_bag
from .retro import (
    RetroRegressor, RoundTripResult, RoundTripRow, UnreachableBag, embedding_distances, format_r, main_product,
    retro_roundtrip_eval, retrosynthesize, train_retro_regressor,
)

__all__ = [
    "OptimizationTrace", "RetroRegressor", "RoundTripResult", "RoundTripRow", "TraceEntry", "UnreachableBag",
    "embedding_distances", "format_r", "local_optimize", "main_product", "property_gradient", "random_walk",
    "retro_roundtrip_eval", "retrosynthesize", "score_bag", "train_retro_regressor",
]
