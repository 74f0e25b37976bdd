"""Reverse-mode automatic differentiation over dense 2-D float64 arrays.

A :class:`Tensor` is one node of an implicit computation tape: it stores its
value, links to the nodes it was computed from, and a closure that pushes the
upstream gradient into those parents. Calling :meth:`Tensor.backward` on a
1x1 result walks the tape once in reverse topological order and leaves
``d(result)/d(leaf)`` on every leaf created with ``requires_grad=True``.

The tape is meant to be rebuilt per minibatch: leaves (parameters) persist,
everything else is garbage-collected with the loss node.

All public operations either raise or produce fully finite values; NaN/Inf
never propagate silently.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ..errors import ContractError, DomainError, ShapeError

__all__ = ["Tensor", "concat_cols", "apply_unary", "UNARY_KINDS"]


def _as_matrix(data) -> np.ndarray:
    if np.isscalar(data):
        return np.full((1, 1), float(data))
    arr = np.array(data, dtype=np.float64, order="C", copy=True)
    if arr.ndim != 2:
        raise ShapeError(f"expected scalar or 2-D data, got ndim={arr.ndim}")
    return arr


def _check_finite(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise DomainError(f"non-finite value produced by '{op}'")
    return arr


class Tensor:
    """A 2-D float64 value recorded on the autodiff tape.

    Parameters
    ----------
    data : scalar or 2-D array-like
        Value of the node; copied to a C-contiguous float64 matrix.
    requires_grad : bool
        Mark this leaf as trainable; :meth:`backward` will accumulate into
        its ``grad``.
    """

    def __init__(self, data, requires_grad: bool = False, *, _parents: tuple = (),
                 _backward: Callable[[np.ndarray], None] | None = None, _op: str = "leaf"):
        self.data = _check_finite(_as_matrix(data), _op)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    # -- basic introspection ------------------------------------------------

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() requires a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"Tensor(shape={self.shape}, op={self._op!r}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def _accum(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    # -- binary operations ----------------------------------------------------

    def matmul(self, other: "Tensor") -> "Tensor":
        if self.cols != other.rows:
            raise ShapeError(f"matmul shape mismatch: {self.shape} x {other.shape}")
        out_data = self.data @ other.data

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(g @ other.data.T)
            if other.requires_grad:
                other._accum(self.data.T @ g)

        return Tensor(out_data, _parents=(self, other), _backward=backward, _op="matmul")

    def add(self, other: "Tensor") -> "Tensor":
        if self.shape != other.shape:
            # allow a single broadcast form: adding a 1xM row (bias) to NxM
            if not (other.shape == (1, self.cols) or self.shape == (1, other.cols)):
                raise ShapeError(f"add shape mismatch: {self.shape} + {other.shape}")
        out_data = self.data + other.data

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(g.sum(axis=0, keepdims=True) if self.rows == 1 and g.shape[0] > 1 else g)
            if other.requires_grad:
                other._accum(g.sum(axis=0, keepdims=True) if other.rows == 1 and g.shape[0] > 1 else g)

        return Tensor(out_data, _parents=(self, other), _backward=backward, _op="add")

    def sub(self, other: "Tensor") -> "Tensor":
        if self.shape != other.shape:
            raise ShapeError(f"sub shape mismatch: {self.shape} - {other.shape}")
        out_data = self.data - other.data

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(g)
            if other.requires_grad:
                other._accum(-g)

        return Tensor(out_data, _parents=(self, other), _backward=backward, _op="sub")

    def mul(self, other: "Tensor") -> "Tensor":
        """Elementwise (Hadamard) product; shapes must match exactly."""
        if self.shape != other.shape:
            raise ShapeError(f"mul shape mismatch: {self.shape} * {other.shape}")
        out_data = self.data * other.data

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(g * other.data)
            if other.requires_grad:
                other._accum(g * self.data)

        return Tensor(out_data, _parents=(self, other), _backward=backward, _op="mul")

    __matmul__ = matmul
    __add__ = add
    __sub__ = sub
    __mul__ = mul

    # -- elementwise unary operations ------------------------------------------

    def neg(self) -> "Tensor":
        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(-g)

        return Tensor(-self.data, _parents=(self,), _backward=backward, _op="neg")

    __neg__ = neg

    def tanh(self) -> "Tensor":
        t = np.tanh(self.data)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(g * (1.0 - t * t))

        return Tensor(t, _parents=(self,), _backward=backward, _op="tanh")

    def softplus(self) -> "Tensor":
        out_data = np.logaddexp(0.0, self.data)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                # sigmoid via tanh keeps large negatives exact without overflow
                self._accum(g * 0.5 * (1.0 + np.tanh(0.5 * self.data)))

        return Tensor(out_data, _parents=(self,), _backward=backward, _op="softplus")

    def exp(self) -> "Tensor":
        with np.errstate(over="raise"):
            try:
                e = np.exp(self.data)
            except FloatingPointError:
                raise DomainError("exp overflow: input too large") from None

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(g * e)

        return Tensor(e, _parents=(self,), _backward=backward, _op="exp")

    def log(self, clamp_min: float | None = None) -> "Tensor":
        """Elementwise natural log.

        With ``clamp_min=None`` any non-positive entry is a :class:`DomainError`
        (the message names the offending index). With a positive ``clamp_min``
        the input is floored there first; the number of floored entries is kept
        on the result node as ``n_clamped`` and those entries get zero gradient.
        """
        if clamp_min is None:
            bad = np.argwhere(self.data <= 0.0)
            if bad.size:
                i, j = bad[0]
                raise DomainError(f"log of non-positive entry {self.data[i, j]!r} at index ({i}, {j})")
            safe = self.data
            n_clamped = 0
        else:
            if clamp_min <= 0.0:
                raise ContractError("clamp_min must be positive")
            n_clamped = int((self.data < clamp_min).sum())
            safe = np.maximum(self.data, clamp_min)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                grad = g / safe
                if n_clamped:
                    grad = np.where(self.data < clamp_min, 0.0, grad)
                self._accum(grad)

        out = Tensor(np.log(safe), _parents=(self,), _backward=backward, _op="log")
        out.n_clamped = n_clamped
        return out

    def square(self) -> "Tensor":
        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(g * 2.0 * self.data)

        return Tensor(self.data * self.data, _parents=(self,), _backward=backward, _op="square")

    def scale(self, c: float) -> "Tensor":
        c = float(c)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(g * c)

        return Tensor(self.data * c, _parents=(self,), _backward=backward, _op="scale")

    def add_scalar(self, c: float) -> "Tensor":
        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(g)

        return Tensor(self.data + float(c), _parents=(self,), _backward=backward, _op="add_scalar")

    # -- reductions -------------------------------------------------------------

    def sum(self) -> "Tensor":
        """Sum of all entries, as a 1x1 tensor."""

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(np.full_like(self.data, g[0, 0]))

        return Tensor(self.data.sum(), _parents=(self,), _backward=backward, _op="sum")

    def sum_rows(self) -> "Tensor":
        """Per-row sum, shape (N, 1)."""

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(np.broadcast_to(g, self.shape).copy())

        return Tensor(self.data.sum(axis=1, keepdims=True), _parents=(self,),
                      _backward=backward, _op="sum_rows")

    # -- structural operations -----------------------------------------------------

    def cols_slice(self, j0: int, j1: int) -> "Tensor":
        if not (0 <= j0 <= j1 <= self.cols):
            raise ShapeError(f"column slice [{j0}:{j1}] out of range for shape {self.shape}")

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[:, j0:j1] = g
                self._accum(full)

        return Tensor(self.data[:, j0:j1], _parents=(self,), _backward=backward, _op="cols")

    def permute_cols(self, perm: Sequence[int]) -> "Tensor":
        perm = np.asarray(perm, dtype=np.intp)
        if perm.shape != (self.cols,) or not np.array_equal(np.sort(perm), np.arange(self.cols)):
            raise ShapeError(f"perm must be a permutation of 0..{self.cols - 1}")

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[:, perm] = g
                self._accum(full)

        return Tensor(self.data[:, perm], _parents=(self,), _backward=backward, _op="permute_cols")

    def pick(self, indices) -> "Tensor":
        """Select one entry per row by column index; result is (N, 1)."""
        idx = np.asarray(indices, dtype=np.intp).reshape(-1)
        if idx.shape[0] != self.rows:
            raise ShapeError(f"pick needs one index per row: {idx.shape[0]} != {self.rows}")
        if idx.size and (idx.min() < 0 or idx.max() >= self.cols):
            raise ShapeError(f"pick index out of range for {self.cols} columns")
        rows_range = np.arange(self.rows)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[rows_range, idx] = g[:, 0]
                self._accum(full)

        return Tensor(self.data[rows_range, idx].reshape(-1, 1), _parents=(self,),
                      _backward=backward, _op="pick")

    def softmax_rows(self) -> "Tensor":
        shifted = self.data - self.data.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        s = e / e.sum(axis=1, keepdims=True)

        def backward(g: np.ndarray) -> None:
            if self.requires_grad:
                self._accum(s * (g - (g * s).sum(axis=1, keepdims=True)))

        return Tensor(s, _parents=(self,), _backward=backward, _op="softmax_rows")

    # -- backward pass ---------------------------------------------------------

    def backward(self) -> None:
        """Run reverse-mode accumulation from this node.

        The node must be 1x1 (a scalar objective). Gradients accumulate into
        ``grad`` of every reachable tensor with ``requires_grad=True``; values
        are left untouched. Unreachable leaves keep ``grad=None``, which reads
        as an all-zero gradient.
        """
        if self.shape != (1, 1):
            raise ContractError(f"backward() requires a scalar (1x1) output, got shape {self.shape}")

        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self._accum(np.ones((1, 1)))
        for node in reversed(order):
            if node._backward is not None and node.requires_grad:
                node._backward(node.grad)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two tensors along columns: (N, Ca) ++ (N, Cb) -> (N, Ca+Cb)."""
    if a.rows != b.rows:
        raise ShapeError(f"concat_cols row mismatch: {a.shape} ++ {b.shape}")
    ca = a.cols

    def backward(g: np.ndarray) -> None:
        if a.requires_grad:
            a._accum(g[:, :ca])
        if b.requires_grad:
            b._accum(g[:, ca:])

    return Tensor(np.concatenate([a.data, b.data], axis=1), _parents=(a, b),
                  _backward=backward, _op="concat_cols")


UNARY_KINDS = ("tanh", "softplus", "exp", "log", "neg", "square")


def apply_unary(x: Tensor, kind: str) -> Tensor:
    """Dispatch an elementwise unary op by name; see :data:`UNARY_KINDS`."""
    if kind not in UNARY_KINDS:
        raise ContractError(f"unknown unary kind {kind!r}; expected one of {UNARY_KINDS}")
    return getattr(x, kind)()
