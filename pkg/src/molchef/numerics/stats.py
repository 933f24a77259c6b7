"""Gaussian reparameterization, MMD, and a PSD matrix square root."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import ShapeMismatch, Tensor


class NotSymmetric(ValueError):
    pass


def gaussian_reparam_sample(mu, log_var, noise) -> Tensor:
    """``mu + exp(log_var / 2) * noise``, differentiable in mu and log_var."""
    mu, log_var, noise = T.as_tensor(mu), T.as_tensor(log_var), T.as_tensor(noise)
    if not (mu.shape == log_var.shape == noise.shape):
        raise ShapeMismatch(f"reparam: {mu.shape}, {log_var.shape}, {noise.shape}")
    return T.add(mu, T.mul(T.exp(T.scale(log_var, 0.5)), noise))


def imq_kernel(sq_dists: Tensor, scale: float) -> Tensor:
    """Inverse multiquadratic ``C / (C + d^2)``."""
    return T.scale(T.reciprocal(T.add_scalar(sq_dists, scale)), scale)


def rbf_kernel(sq_dists: Tensor, scale: float) -> Tensor:
    """Gaussian ``exp(-d^2 / C)``."""
    return T.exp(T.scale(sq_dists, -1.0 / scale))


_KERNELS = {"imq": imq_kernel, "rbf": rbf_kernel}


def mmd_squared(sample_a, sample_b, kernel: str = "imq", scale: float | None = None) -> Tensor:
    """Biased (V-statistic) estimate of squared MMD between two samples.

    The kernel scale defaults to ``2 * d``.
    """
    a, b = T.as_tensor(sample_a), T.as_tensor(sample_b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1] or not a.shape[0] or not b.shape[0]:
        raise ShapeMismatch(f"mmd_squared: {a.shape} vs {b.shape}")
    if kernel not in _KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    k = _KERNELS[kernel]
    c = 2.0 * a.shape[1] if scale is None else scale
    kaa = T.mean(k(T.pairwise_sq_dists(a, a), c))
    kbb = T.mean(k(T.pairwise_sq_dists(b, b), c))
    kab = T.mean(k(T.pairwise_sq_dists(a, b), c))
    return T.sub(T.add(kaa, kbb), T.scale(kab, 2.0))


def jacobi_eigh(m: np.ndarray, tol: float = 1e-15, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors as columns).
    """
    a = np.array(m, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.sqrt(max(0.0, (a * a).sum() - (np.diag(a) ** 2).sum()))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta  # theta^2 would overflow
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
    return np.diag(a).copy(), v


def psd_matrix_sqrt(m) -> np.ndarray:
    """Symmetric square root of a positive semi-definite matrix.

    The input is symmetrized and negative eigenvalues are clamped to zero.
    """
    m = np.asarray(m.value if isinstance(m, Tensor) else m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeMismatch(f"psd_matrix_sqrt: {m.shape}")
    asym = np.abs(m - m.T).max() if m.size else 0.0
    if asym > 1e-6 * max(1.0, np.abs(m).max()):
        raise NotSymmetric(f"asymmetry {asym:.3g}")
    sym = 0.5 * (m + m.T)
    vals, vecs = jacobi_eigh(sym)
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ vecs.T
