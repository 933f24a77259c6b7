"""Reactant-bag generative modelling of synthesizable molecules."""

__version__ = "0.1.0"
