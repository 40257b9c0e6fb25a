"""Dense matrix arithmetic and reverse-mode differentiation.

Values are plain 2D numpy arrays (float32 for training, float64 for
verification work). `Tape`/`Var` add reverse-mode gradients on top.
"""

from .ops import Matrix, ShapeError, as_matrix, matmul, softmax_rows
from .autodiff import (
    EvaluationError,
    Tape,
    Var,
    add,
    concat_cols,
    div,
    exp,
    grad_check,
    logistic,
    matmul_v,
    mul,
    relu,
    slice_cols,
    softmax_rows_v,
    softplus,
    sqrt,
    sub,
    sum_all,
    sum_axis,
    transpose,
)

__all__ = [
    "Matrix",
    "ShapeError",
    "EvaluationError",
    "as_matrix",
    "matmul",
    "softmax_rows",
    "Tape",
    "Var",
    "add",
    "sub",
    "mul",
    "div",
    "matmul_v",
    "transpose",
    "relu",
    "logistic",
    "softplus",
    "exp",
    "sqrt",
    "sum_all",
    "sum_axis",
    "concat_cols",
    "slice_cols",
    "softmax_rows_v",
    "grad_check",
]
