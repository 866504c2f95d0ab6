"""Minimal float64 tensor kernel with reverse-mode differentiation."""

from .checkpoint import CheckpointError, assign_parameters, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, finite_diff_check, relative_error
from .ops import (
    ACTIVATIONS,
    bce_loss,
    bidirectional_gru,
    bilinear_resize,
    conv2d,
    dense,
    gru_layer,
    interpolation_matrix,
    max_pool,
    mse_loss,
    relu,
    sigmoid,
    softplus,
    tanh,
    weighted_average,
)
from .optim import Adam
from .tensor import DimensionError, Parameter, Tensor, concat, no_grad, stack

__all__ = [
    "ACTIVATIONS",
    "Adam",
    "CheckpointError",
    "DimensionError",
    "GradCheckReport",
    "Parameter",
    "Tensor",
    "assign_parameters",
    "bce_loss",
    "bidirectional_gru",
    "bilinear_resize",
    "concat",
    "conv2d",
    "dense",
    "finite_diff_check",
    "gru_layer",
    "interpolation_matrix",
    "load_checkpoint",
    "max_pool",
    "mse_loss",
    "no_grad",
    "relative_error",
    "relu",
    "save_checkpoint",
    "sigmoid",
    "softplus",
    "stack",
    "tanh",
    "weighted_average",
]
