"""Minimal fixed-architecture differentiable function library."""

from .autodiff import BackwardWithoutForwardError, Var, backward
from .checkpoint import CHECKPOINT_VERSION, load_checkpoint, save_checkpoint
from .models import (
    HIDDEN,
    ArchSpec,
    PolicyNet,
    ValueNet,
    gather_grads,
    gru_cell,
    orthogonal,
    sample_categorical,
)
from .params import ParamVector

__all__ = [
    "Var",
    "backward",
    "BackwardWithoutForwardError",
    "ParamVector",
    "PolicyNet",
    "ValueNet",
    "ArchSpec",
    "HIDDEN",
    "gather_grads",
    "gru_cell",
    "orthogonal",
    "sample_categorical",
    "save_checkpoint",
    "load_checkpoint",
    "CHECKPOINT_VERSION",
]
