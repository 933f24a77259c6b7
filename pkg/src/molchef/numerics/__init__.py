"""Minimal float64 tensor engine with reverse-mode differentiation."""

from . import tensor as ops
from .layers import gru_cell, init_gru, init_linear, init_mlp, linear, mlp
from .params import ParameterStore, adam_step, finite_diff_grad
from .stats import NotSymmetric, gaussian_reparam_sample, jacobi_eigh, mmd_squared, psd_matrix_sqrt
from .tensor import NonFiniteValue, ShapeMismatch, Tape, Tensor

__all__ = [
    "NonFiniteValue", "NotSymmetric", "ParameterStore", "ShapeMismatch", "Tape", "Tensor",
    "adam_step", "finite_diff_grad", "gaussian_reparam_sample", "gru_cell", "init_gru",
    "init_linear", "init_mlp", "jacobi_eigh", "linear", "mlp", "mmd_squared", "ops", "psd_matrix_sqrt",
]
