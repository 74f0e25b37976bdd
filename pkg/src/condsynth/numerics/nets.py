"""Small fully-connected networks built on the autodiff tensors."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .optim import glorot_uniform
from .tensor import Tensor

__all__ = ["Mlp"]


class Mlp:
    """Stack of linear layers with tanh between them and a linear output.

    ``zero_last=True`` initializes the final layer's weights and bias to
    zero, so the network starts out as the constant-zero function (used to
    make fresh coupling layers the identity map).
    """

    def __init__(self, sizes: list[int], rng: np.random.Generator, zero_last: bool = False):
        if len(sizes) < 2:
            raise ShapeError("Mlp needs at least input and output sizes")
        self.sizes = list(sizes)
        self.weights: list[Tensor] = []
        self.biases: list[Tensor] = []
        last = len(sizes) - 2
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            if zero_last and i == last:
                w = np.zeros((fan_in, fan_out))
            else:
                w = glorot_uniform(rng, fan_in, fan_out)
            self.weights.append(Tensor(w, requires_grad=True))
            self.biases.append(Tensor(np.zeros((1, fan_out)), requires_grad=True))

    @property
    def params(self) -> list[Tensor]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def __call__(self, x: Tensor) -> Tensor:
        if x.cols != self.sizes[0]:
            raise ShapeError(f"Mlp expects {self.sizes[0]} input columns, got {x.cols}")
        h = x
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h.matmul(w).add(b)
            if i < n - 1:
                h = h.tanh()
        return h

    def forward_np(self, x: np.ndarray) -> np.ndarray:
        """Plain numpy forward pass (no tape); used on frozen networks."""
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ShapeError(f"Mlp expects (N, {self.sizes[0]}) input, got {x.shape}")
        h = x
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.data + b.data
            if i < n - 1:
                h = np.tanh(h)
        return h
