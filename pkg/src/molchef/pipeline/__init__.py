"""Data files, toy corpus generation, weight persistence, and the CLI."""

from .io import (
    BadMagic, ChecksumMismatch, EmptyVocabulary, ParseError, ReactionRecord, TruncatedFile, VersionMismatch,
    build_vocab, decode_weights, encode_weights, load_weights, parse_reactions, reachable, read_reactions,
    read_vocab, render_reactions, save_weights, write_reactions, write_vocab,
)
from .toy import ToyCorpus, gen_toy_dataset

__all__ = [
    "BadMagic", "ChecksumMismatch", "EmptyVocabulary", "ParseError", "ReactionRecord", "ToyCorpus",
    "TruncatedFile", "VersionMismatch", "build_vocab", "decode_weights", "encode_weights", "gen_toy_dataset",
    "load_weights", "parse_reactions", "reachable", "read_reactions", "read_vocab", "render_reactions",
    "save_weights", "write_reactions", "write_vocab",
]
