"""Minimal dense-tensor algebra with reverse-mode automatic differentiation."""

from budgetformer.autograd.functional import (
    dropout,
    embedding,
    gelu,
    layer_norm,
    log_softmax,
    masked_mean_pool,
    relu,
    sigmoid,
    softmax,
    xlogx,
)
from budgetformer.autograd.tensor import (
    Tape,
    Tensor,
    active_tape,
    add,
    as_tensor,
    backward,
    concat,
    div,
    exp,
    index,
    log,
    matmul,
    mean,
    mul,
    reshape,
    sub,
    tensor_sum,
    transpose,
)

__all__ = [
    "Tape",
    "Tensor",
    "active_tape",
    "add",
    "as_tensor",
    "backward",
    "concat",
    "div",
    "dropout",
    "embedding",
    "exp",
    "gelu",
    "index",
    "layer_norm",
    "log",
    "log_softmax",
    "masked_mean_pool",
    "matmul",
    "mean",
    "mul",
    "relu",
    "reshape",
    "sigmoid",
    "softmax",
    "sub",
    "tensor_sum",
    "transpose",
    "xlogx",
]
