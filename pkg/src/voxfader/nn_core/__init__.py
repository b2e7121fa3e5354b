"""Minimal reverse-mode differentiation, parameter sets, optimizers and checkpoints."""

from .checkpoint import load_arrays, load_checkpoint, save_arrays, save_checkpoint
from .optim import OptimizerState, adam, optimizer_step, sgd_momentum
from .params import ParameterSet
from .tape import (
    PRIMITIVES,
    Entry,
    Tape,
    Var,
    activation,
    add,
    affine,
    backward,
    bce_from_logit,
    concat,
    l2_normalize_rows,
    mae_loss,
    matmul,
    mean,
    mul,
    pairwise_sqdist,
    relu,
    sigmoid,
    sub,
    sum_,
    tanh,
)

affine_forward = affine

__all__ = [
    "PRIMITIVES", "Entry", "Tape", "Var", "ParameterSet", "OptimizerState",
    "activation", "add", "affine", "affine_forward", "backward", "bce_from_logit", "concat",
    "l2_normalize_rows", "mae_loss", "matmul", "mean", "mul", "pairwise_sqdist", "relu",
    "sigmoid", "sub", "sum_", "tanh", "adam", "sgd_momentum", "optimizer_step",
    "save_arrays", "load_arrays", "save_checkpoint", "load_checkpoint",
]
