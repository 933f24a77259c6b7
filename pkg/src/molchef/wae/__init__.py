"""Reactant-bag Wasserstein autoencoder with a latent property head."""

from .model import BatchTooSmall, DecodeResult, GaussianPosterior, MoleculeChef
from .train import EpochLog, reconstruction_accuracy, train
from .vocab import Bag, EmptyBag, ReactantVocabulary, VocabularyError, make_bag

__all__ = [
    "Bag", "BatchTooSmall", "DecodeResult", "EmptyBag", "EpochLog", "GaussianPosterior", "MoleculeChef",
    "ReactantVocabulary", "VocabularyError", "make_bag", "reconstruction_accuracy", "train",
]
