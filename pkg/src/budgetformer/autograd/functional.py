"""Differentiable neural-network primitives built on :mod:`budgetformer.autograd.tensor`."""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from budgetformer.autograd.tensor import Array, Tensor, make_result, mul
from budgetformer.errors import DegenerateInputError, DimensionError, ParameterError

LAYER_NORM_EPS = 1e-5

# Constant of the tanh GELU approximation
_GELU_C = math.sqrt(2.0 / math.pi)


def sigmoid(x: Tensor) -> Tensor:
    """Elementwise logistic function, evaluated without overflow for large |x|."""
    decay = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay))
    return make_result(out, "sigmoid", (x,), lambda g: (g * out * (1.0 - out),))


def relu(x: Tensor) -> Tensor:
    active = x.data > 0
    return make_result(np.where(active, x.data, 0.0), "relu", (x,), lambda g: (g * active,))


def gelu(x: Tensor) -> Tensor:
    """GELU with the tanh approximation."""
    data = x.data
    inner = _GELU_C * (data + 0.044715 * data**3)
    tanh = np.tanh(inner)
    out = 0.5 * data * (1.0 + tanh)

    def rule(g: Array) -> tuple[Array]:
        d_inner = _GELU_C * (1.0 + 3.0 * 0.044715 * data**2)
        return (g * (0.5 * (1.0 + tanh) + 0.5 * data * (1.0 - tanh**2) * d_inner),)

    return make_result(out, "gelu", (x,), rule)


def softmax(
    x: Tensor,
    axis: int = -1,
    temperature: float = 1.0,
    mask: NDArray[np.bool_] | None = None,
) -> Tensor:
    """Temperature-scaled softmax along ``axis``.

    Entries where ``mask`` is False get probability exactly 0; every slice
    along ``axis`` must keep at least one unmasked entry.
    """
    if not temperature > 0:
        raise ParameterError(f"softmax temperature must be positive, got {temperature}")
    scaled = x.data / temperature
    if mask is not None:
        scaled = np.where(mask, scaled, -np.inf)
    shifted = scaled - scaled.max(axis=axis, keepdims=True)
    weights = np.exp(shifted)
    out = weights / weights.sum(axis=axis, keepdims=True)

    def rule(g: Array) -> tuple[Array]:
        inner = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - inner) / temperature,)

    return make_result(out, "softmax", (x,), rule)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - log_norm
    probs = np.exp(out)

    def rule(g: Array) -> tuple[Array]:
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return make_result(out, "log_softmax", (x,), rule)


def xlogx(p: Tensor) -> Tensor:
    """Elementwise p*log(p) with 0*log(0) = 0."""
    positive = p.data > 0
    safe = np.where(positive, p.data, 1.0)
    out = np.where(positive, p.data * np.log(safe), 0.0)
    return make_result(
        out, "xlogx", (p,), lambda g: (np.where(positive, g * (np.log(safe) + 1.0), 0.0),)
    )


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    width = x.shape[-1]
    if gain.shape != (width,) or bias.shape != (width,):
        raise DimensionError(
            f"layer_norm: gain {gain.shape} and bias {bias.shape} must match width {width}"
        )
    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered**2).mean(axis=-1, keepdims=True) + eps)
    normed = centered * inv_std
    out = normed * gain.data + bias.data

    def rule(g: Array) -> tuple[Array, Array, Array]:
        reduce_axes = tuple(range(g.ndim - 1))
        d_normed = g * gain.data
        d_x = inv_std * (
            d_normed
            - d_normed.mean(axis=-1, keepdims=True)
            - normed * (d_normed * normed).mean(axis=-1, keepdims=True)
        )
        return d_x, (g * normed).sum(axis=reduce_axes), g.sum(axis=reduce_axes)

    return make_result(out, "layer_norm", (x, gain, bias), rule)


def masked_mean_pool(x: Tensor, mask: ArrayLike) -> Tensor:
    """Mean over the token axis (-2) of ``x`` counting only rows where mask is 1."""
    weights_mask = np.asarray(mask, dtype=np.float64)
    if weights_mask.shape != x.shape[:-1]:
        raise DimensionError(
            f"masked_mean_pool: mask shape {weights_mask.shape} does not match input {x.shape}"
        )
    counts = weights_mask.sum(axis=-1, keepdims=True)
    if np.any(counts == 0):
        raise DegenerateInputError("masked_mean_pool: mask has no active entry")
    weights = weights_mask / counts
    out = (x.data * weights[..., None]).sum(axis=-2)

    def rule(g: Array) -> tuple[Array]:
        return (np.expand_dims(g, -2) * weights[..., None],)

    return make_result(out, "masked_mean_pool", (x,), rule)


def embedding(weight: Tensor, ids: NDArray[np.integer]) -> Tensor:
    """Gather rows of ``weight`` for each id."""
    ids = np.asarray(ids, dtype=np.int64)

    def rule(g: Array) -> tuple[Array]:
        grad = np.zeros_like(weight.data)
        np.add.at(grad, ids, g)
        return (grad,)

    return make_result(weight.data[ids], "embedding", (weight,), rule)


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when ``rate`` is 0 or no generator is given."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor._wrap(keep))
