"""Pure numpy implementations of the second-order context kernels.

Used when the compiled extension is unavailable or explicitly disabled via
CORRPRUNE_KERNELS=numpy. Same contracts as the compiled module: input is
one C-contiguous row-stochastic (N, N) map, output a length-N vector of
the map's dtype.
"""

from __future__ import annotations

import math

import numpy as np

SQRT2 = math.sqrt(2.0)


def column_sums(a: np.ndarray) -> np.ndarray:
    return a.sum(axis=0)


def soc_linear(a: np.ndarray, col_sums: np.ndarray | None = None) -> np.ndarray:
    """sqrt(2) * (s_i - s_i^2 / N) from column sums alone."""
    s = column_sums(a) if col_sums is None else col_sums
    n = a.shape[0]
    return (s - s * s * (1.0 / n)) * a.dtype.type(SQRT2)


def soc_quadratic(a: np.ndarray, col_sums: np.ndarray | None = None) -> np.ndarray:
    """sqrt(2) * (s_i - sum_k a_ki^2): the off-diagonal mass of column i of A^T A."""
    s = column_sums(a) if col_sums is None else col_sums
    q = np.einsum("ki,ki->i", a, a)
    return (s - q) * a.dtype.type(SQRT2)


def soc_cubic(a: np.ndarray) -> np.ndarray:
    """sqrt(r_i^2 + t_i) over the materialized similarity-of-attention map.

    r_i and t_i are the off-diagonal row sum and row sum of squares of
    W = A^T A; the N^3 cost lives in the product.
    """
    w = a.T @ a
    d = np.einsum("ii->i", w)
    r = w.sum(axis=1) - d
    t = np.einsum("ij,ij->i", w, w) - d * d
    return np.sqrt(r * r + t)
