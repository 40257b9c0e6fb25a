"""Value-level matrix operations.

Everything here acts on plain 2D numpy arrays and is shared by the
differentiable layer in `autodiff` and by test oracles.
"""

from __future__ import annotations

import numpy as np

# A Matrix is a 2D numpy array of float32 or float64. Row-major storage,
# rows x cols, all entries finite after any public operation on finite
# input. Kept as an alias rather than a wrapper class: every consumer in
# this package speaks numpy.
Matrix = np.ndarray


class ShapeError(ValueError):
    """Operand shapes do not admit the requested operation."""


def as_matrix(x, dtype=None) -> Matrix:
    """Coerce scalars / nested lists / arrays to a 2D float array.

    Scalars become 1x1, flat vectors become a single row.
    """
    a = np.asarray(x, dtype=dtype)
    if not np.issubdtype(a.dtype, np.floating):
        a = a.astype(np.float64)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1)
    elif a.ndim != 2:
        raise ShapeError(f"expected at most 2 dimensions, got shape {a.shape}")
    return a


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product with an explicit shape check naming both operands."""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def softmax_rows(m: Matrix) -> Matrix:
    """Row-wise softmax with row-max subtraction so large logits cannot overflow."""
    z = m - m.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
