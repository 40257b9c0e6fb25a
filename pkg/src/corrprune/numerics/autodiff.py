"""Reverse-mode differentiation on a tape of matrix operations.

A `Tape` records every primitive applied to tracked `Var`s in execution
order, which is already a topological order of the computation graph; the
backward sweep simply walks the record in reverse. The scalar loss / many
parameters regime of this package makes reverse mode the only sensible
choice.

`Var`s without a tape are constants: they participate in forward
computation (so the same model code can be re-evaluated for finite
differences) but receive no gradient.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .ops import ShapeError, as_matrix


class EvaluationError(ArithmeticError):
    """A function produced a non-finite value where a finite one was required."""


class Var:
    """A 2D matrix value, optionally tracked on a tape.

    `grad` is populated by `Tape.backward` for every tracked Var that the
    loss depends on; it stays None for constants and unused branches.
    """

    __slots__ = ("value", "grad", "tape")

    def __init__(self, value, tape=None):
        self.value = as_matrix(value)
        self.grad = None
        self.tape = tape

    @property
    def shape(self):
        return self.value.shape

    @property
    def dtype(self):
        return self.value.dtype

    # Operator sugar; plain numbers and arrays are wrapped as constants.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __matmul__(self, other):
        return matmul_v(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    @property
    def T(self):
        return transpose(self)

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item() needs a 1x1 value, got {self.value.shape}")
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Var(shape={self.value.shape}, tracked={self.tape is not None})"


class _Node:
    __slots__ = ("op", "out", "inputs", "vjp")

    def __init__(self, op, out, inputs, vjp):
        self.op = op
        self.out = out
        self.inputs = inputs
        self.vjp = vjp


class Tape:
    """Ordered record of primitive operations for one backward sweep."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def var(self, value) -> Var:
        """Register a tracked leaf (parameter or differentiated input)."""
        return Var(value, tape=self)

    def record(self, op: str, out_value, inputs: Sequence[Var], vjp: Callable) -> Var:
        """Record a primitive. `vjp(g)` must return one gradient per input.

        Public so that modules can register custom primitives (the
        second-order context forms do) without touching this file.
        """
        out = Var(out_value, tape=self)
        self.nodes.append(_Node(op, out, tuple(inputs), vjp))
        return out

    def backward(self, loss: Var) -> None:
        """Accumulate d(loss)/d(var) into `.grad` of every tracked Var.

        Visits the recorded nodes in exact reverse order, which reverses a
        topological order because nodes were appended at execution time.
        """
        if loss.tape is not self:
            raise ValueError("loss does not belong to this tape")
        if loss.value.shape != (1, 1):
            raise ShapeError(f"backward needs a 1x1 loss, got {loss.value.shape}")
        loss.grad = np.ones((1, 1), dtype=loss.value.dtype)
        for node in reversed(self.nodes):
            g = node.out.grad
            if g is None:
                continue
            grads = node.vjp(g)
            for inp, gi in zip(node.inputs, grads):
                if inp.tape is None or gi is None:
                    continue
                if inp.grad is None:
                    inp.grad = np.zeros_like(inp.value)
                inp.grad += gi


def _as_var(x) -> Var:
    if isinstance(x, Var):
        return x
    return Var(x)  # constant


def _find_tape(*vars_: Var):
    tape = None
    for v in vars_:
        if v.tape is not None:
            if tape is not None and tape is not v.tape:
                raise ValueError("operands live on different tapes")
            tape = v.tape
    return tape


def _emit(op, out_value, inputs, vjp) -> Var:
    tape = _find_tape(*inputs)
    if tape is None:
        return Var(out_value)  # constant-only computation, nothing to record
    return tape.record(op, out_value, inputs, vjp)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient over the axes a forward broadcast expanded."""
    if g.shape == shape:
        return g
    out = g
    if shape[0] == 1 and out.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and out.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def add(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    out = a.value + b.value

    def vjp(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(g, b.value.shape)

    return _emit("add", out, (a, b), vjp)


def sub(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    out = a.value - b.value

    def vjp(g):
        return _unbroadcast(g, a.value.shape), _unbroadcast(-g, b.value.shape)

    return _emit("sub", out, (a, b), vjp)


def mul(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    out = a.value * b.value

    def vjp(g):
        return (
            _unbroadcast(g * b.value, a.value.shape),
            _unbroadcast(g * a.value, b.value.shape),
        )

    return _emit("mul", out, (a, b), vjp)


def div(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    out = a.value / b.value

    def vjp(g):
        return (
            _unbroadcast(g / b.value, a.value.shape),
            _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape),
        )

    return _emit("div", out, (a, b), vjp)


def matmul_v(a, b) -> Var:
    a, b = _as_var(a), _as_var(b)
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(
            f"cannot multiply {a.value.shape[0]}x{a.value.shape[1]} "
            f"by {b.value.shape[0]}x{b.value.shape[1]}"
        )
    out = a.value @ b.value

    def vjp(g):
        return g @ b.value.T, a.value.T @ g

    return _emit("matmul", out, (a, b), vjp)


def transpose(a) -> Var:
    a = _as_var(a)

    def vjp(g):
        return (g.T.copy(),)

    return _emit("transpose", a.value.T.copy(), (a,), vjp)


def relu(a) -> Var:
    a = _as_var(a)
    mask = a.value > 0
    out = np.where(mask, a.value, 0)

    def vjp(g):
        return (g * mask,)

    return _emit("relu", out, (a,), vjp)


def logistic(a) -> Var:
    """Elementwise 1/(1+exp(-x)), computed without overflow on either tail."""
    a = _as_var(a)
    x = a.value
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def vjp(g):
        return (g * out * (1.0 - out),)

    return _emit("logistic", out, (a,), vjp)


def softplus(a) -> Var:
    """log(1+exp(x)) in the overflow-free max(x,0)+log1p(exp(-|x|)) form."""
    a = _as_var(a)
    x = a.value
    out = np.maximum(x, 0) + np.log1p(np.exp(-np.abs(x)))

    def vjp(g):
        sig = np.empty_like(x)
        pos = x >= 0
        sig[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        sig[~pos] = ex / (1.0 + ex)
        return (g * sig,)

    return _emit("softplus", out, (a,), vjp)


def exp(a) -> Var:
    a = _as_var(a)
    out = np.exp(a.value)

    def vjp(g):
        return (g * out,)

    return _emit("exp", out, (a,), vjp)


def sqrt(a) -> Var:
    """Elementwise square root; differentiable only for strictly positive input."""
    a = _as_var(a)
    out = np.sqrt(a.value)

    def vjp(g):
        return (g * 0.5 / out,)

    return _emit("sqrt", out, (a,), vjp)


def sum_all(a) -> Var:
    a = _as_var(a)
    out = np.array([[a.value.sum()]], dtype=a.value.dtype)

    def vjp(g):
        return (np.broadcast_to(g, a.value.shape) * np.ones_like(a.value),)

    return _emit("sum_all", out, (a,), vjp)


def sum_axis(a, axis: int) -> Var:
    a = _as_var(a)
    out = a.value.sum(axis=axis, keepdims=True)

    def vjp(g):
        return (np.broadcast_to(g, a.value.shape).copy(),)

    return _emit("sum_axis", out, (a,), vjp)


def softmax_rows_v(a) -> Var:
    """Row-stochastic softmax (max-subtracted) as a single primitive."""
    a = _as_var(a)
    z = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - dot),)

    return _emit("softmax_rows", out, (a,), vjp)


def concat_cols(parts) -> Var:
    parts = [_as_var(p) for p in parts]
    widths = [p.value.shape[1] for p in parts]
    out = np.concatenate([p.value for p in parts], axis=1)

    def vjp(g):
        grads = []
        start = 0
        for w in widths:
            grads.append(g[:, start : start + w])
            start += w
        return tuple(grads)

    return _emit("concat_cols", out, tuple(parts), vjp)


def slice_cols(a, start: int, stop: int) -> Var:
    a = _as_var(a)
    out = a.value[:, start:stop].copy()

    def vjp(g):
        full = np.zeros_like(a.value)
        full[:, start:stop] = g
        return (full,)

    return _emit("slice_cols", out, (a,), vjp)


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------


def grad_check(f: Callable[[Var], Var], x, eps: float = 1e-5) -> float:
    """Compare the tape gradient of a scalar function against central differences.

    `f` must map a Var holding a matrix to a 1x1 Var. Returns the maximum
    per-coordinate relative error between the reverse-mode gradient and
    (f(x+eps) - f(x-eps)) / (2 eps), with the denominator floored at 1 so
    near-zero gradients are compared absolutely.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = as_matrix(x, dtype=np.float64)

    tape = Tape()
    xv = tape.var(x.copy())
    out = f(xv)
    if not np.all(np.isfinite(out.value)):
        raise EvaluationError("function value is not finite at x")
    tape.backward(out)
    analytic = xv.grad if xv.grad is not None else np.zeros_like(x)

    fd = np.zeros_like(x)
    for i in range(x.shape[0]):
        for j in range(x.shape[1]):
            probe = x.copy()
            probe[i, j] = x[i, j] + eps
            hi = f(Var(probe)).value
            probe[i, j] = x[i, j] - eps
            lo = f(Var(probe)).value
            if not (np.all(np.isfinite(hi)) and np.all(np.isfinite(lo))):
                raise EvaluationError(f"function value is not finite near x[{i},{j}]")
            fd[i, j] = (hi[0, 0] - lo[0, 0]) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1.0)
    return float(np.max(np.abs(analytic - fd) / denom))
