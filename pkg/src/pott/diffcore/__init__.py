"""Reverse-mode autodiff over dense f64 tensors, plus Adam."""

from . import ops
from .gradcheck import finite_diff_check
from .optim import Adam, AdamState, adam_step
from .tensor import (
    FFTLengthError,
    GraphError,
    NonFiniteError,
    ShapeError,
    Tape,
    Tensor,
    as_tensor,
    backward,
    grad_enabled,
    no_grad,
)

__all__ = [
    "Adam",
    "AdamState",
    "FFTLengthError",
    "GraphError",
    "NonFiniteError",
    "ShapeError",
    "Tape",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "finite_diff_check",
    "grad_enabled",
    "no_grad",
    "ops",
]
