"""Numeric substrate: autodiff tensors, networks, and the Adam optimizer."""

from .nets import Mlp
from .optim import Adam, glorot_uniform
from .tensor import Tensor, UNARY_KINDS, apply_unary, concat_cols

__all__ = ["Tensor", "concat_cols", "apply_unary", "UNARY_KINDS", "Adam", "glorot_uniform", "Mlp"]
