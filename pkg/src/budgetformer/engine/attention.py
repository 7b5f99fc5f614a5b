"""Standard and budgeted multi-head attention.

Budgeted attention predicts, per example, a budget ``s`` (the fraction of
heads to use) and a relevance distribution ``p`` over heads. Training
weights every head output by ``w = s * H * p``. Inference keeps only the
``k = max(1, floor(s * H))`` most probable heads, still weighted by ``w``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from budgetformer.autograd import (
    Tensor,
    as_tensor,
    masked_mean_pool,
    relu,
    sigmoid,
    softmax,
)
from budgetformer.autograd.tensor import Array
from budgetformer.engine.layers import Linear, Module, init_weight
from budgetformer.engine.schedules import noise_scale, temperature
from budgetformer.errors import ContractError, DimensionError, ParameterError
from budgetformer.models.config import ScheduleConfig

AttentionPath = Literal["auto", "mask", "skip"]


class Mode(StrEnum):
    """Forward-pass mode."""

    TRAIN = "train"
    INFERENCE = "inference"


class AttentionParams(Module):
    """Bias-free Q, K, V and output projections of one attention sublayer."""

    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator) -> None:
        if n_heads < 1 or d_model % n_heads != 0:
            raise ParameterError(
                f"d_model ({d_model}) must be divisible by n_heads ({n_heads})"
            )
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.w_q = init_weight(rng, d_model, d_model)
        self.w_k = init_weight(rng, d_model, d_model)
        self.w_v = init_weight(rng, d_model, d_model)
        self.w_o = init_weight(rng, d_model, d_model)

    @property
    def d_model(self) -> int:
        return self.n_heads * self.head_dim


class BudgetNets(Module):
    """Budget network f_theta (D -> D -> 1, ReLU) and gating network g_phi (D -> H)."""

    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator) -> None:
        self.budget_hidden = Linear(d_model, d_model, rng)
        self.budget_out = Linear(d_model, 1, rng)
        self.gate = Linear(d_model, n_heads, rng)

    @property
    def n_heads(self) -> int:
        return self.gate.out_features

    def budget_logit(self, h: Tensor) -> Tensor:
        return self.budget_out(relu(self.budget_hidden(h)))


@dataclass
class HeadSelection:
    """Gating record of one example in one attention layer."""

    s: float
    z: Array
    p: Array
    w: Array
    mask: NDArray[np.bool_]
    k: int

    @property
    def n_heads(self) -> int:
        return int(self.p.shape[0])

    @property
    def entropy_term(self) -> float:
        """sum(p log p), with 0 log 0 = 0."""
        positive = self.p[self.p > 0]
        return float(np.sum(positive * np.log(positive)))

    def head_order(self) -> list[int]:
        """Heads by descending p, ties by lower index."""
        return [int(i) for i in np.argsort(-self.p, kind="stable")]

    def to_dict(self) -> dict[str, Any]:
        return {
            "s": self.s,
            "z": self.z.tolist(),
            "p": self.p.tolist(),
            "w": self.w.tolist(),
            "mask": [int(bit) for bit in self.mask],
            "k": self.k,
        }


@dataclass
class GatingOverride:
    """Replacements for the learned gating used by ablations and forced evaluation.

    ``budget`` fixes s (a scalar, or one value per example); f_theta is not
    evaluated. ``random_gating`` replaces g_phi scores by standard-normal
    draws. ``force_k`` overrides the number of active heads at inference.
    """

    budget: float | Array | None = None
    random_gating: bool = False
    force_k: int | None = None


@dataclass
class AttentionOutput:
    output: Tensor
    selections: list[HeadSelection] = field(default_factory=list)
    budget: Tensor | None = None
    probs: Tensor | None = None
    attention: Array | None = None


# Shared kernels -------------------------------------------------------------


def _key_mask(pad_mask: ArrayLike, batch: int, n_tokens: int) -> NDArray[np.bool_]:
    mask = np.asarray(pad_mask, dtype=bool)
    if mask.shape != (batch, n_tokens):
        raise DimensionError(
            f"pad_mask shape {mask.shape} does not match batch and sequence ({batch}, {n_tokens})"
        )
    if not mask.any(axis=1).all():
        raise ContractError("every example needs at least one unpadded token")
    return mask


def _split_heads(x: Tensor, n_heads: int) -> Tensor:
    batch, n_tokens, width = x.shape
    return x.reshape((batch, n_tokens, n_heads, width // n_heads)).transpose((0, 2, 1, 3))


def _merge_heads(x: Tensor) -> Tensor:
    batch, n_heads, n_tokens, head_dim = x.shape
    return x.transpose((0, 2, 1, 3)).reshape((batch, n_tokens, n_heads * head_dim))


def _all_head_contexts(
    x: Tensor, params: AttentionParams, key_mask: NDArray[np.bool_]
) -> tuple[Tensor, Tensor]:
    """Per-head attention outputs (B, H, N, d_h) and probabilities (B, H, N, N)."""
    q = _split_heads(x @ params.w_q, params.n_heads)
    k = _split_heads(x @ params.w_k, params.n_heads)
    v = _split_heads(x @ params.w_v, params.n_heads)
    scores = (q @ k.transpose((0, 1, 3, 2))) * (1.0 / math.sqrt(params.head_dim))
    probs = softmax(scores, axis=-1, mask=key_mask[:, None, None, :])
    return probs @ v, probs


def _check_input(x: Tensor, params: AttentionParams) -> None:
    if x.ndim != 3 or x.shape[-1] != params.d_model:
        raise DimensionError(
            f"attention input {x.shape} does not match (B, N, {params.d_model})"
        )


# Standard attention ---------------------------------------------------------


def standard_mha(
    x: Tensor,
    params: AttentionParams,
    pad_mask: ArrayLike,
    return_attention: bool = False,
) -> AttentionOutput:
    """Scaled dot-product attention over all heads with padded keys excluded."""
    _check_input(x, params)
    key_mask = _key_mask(pad_mask, x.shape[0], x.shape[1])
    contexts, probs = _all_head_contexts(x, params, key_mask)
    out = _merge_heads(contexts) @ params.w_o
    return AttentionOutput(output=out, attention=probs.numpy() if return_attention else None)


# Gating ---------------------------------------------------------------------


def compute_budget(h: Tensor, nets: BudgetNets) -> Tensor:
    """s = sigmoid(f_theta(h)) for a summary of shape (..., D); returns shape (...)."""
    logit = nets.budget_logit(h)
    return sigmoid(logit.reshape(logit.shape[:-1]))


def head_scores(
    h: Tensor,
    nets: BudgetNets,
    t: int,
    cfg: ScheduleConfig,
    rng: np.random.Generator | None,
    mode: Mode,
) -> Tensor:
    """Gating scores z = g_phi(h), plus scheduled Gaussian noise in train mode."""
    z = nets.gate(h)
    if mode == Mode.INFERENCE:
        return z
    if rng is None:
        raise ContractError("train-mode head scores need a random generator")
    scale = noise_scale(t, cfg)
    if scale == 0.0:
        return z
    return z + rng.standard_normal(z.shape) * scale


def head_probs(z: Tensor, t: int, cfg: ScheduleConfig) -> Tensor:
    """p = softmax(z / tau(t)) over the head axis."""
    return softmax(z, axis=-1, temperature=temperature(t, cfg))


def head_weights(s: Tensor | float, p: Tensor) -> Tensor:
    """w_i = s * H * p_i."""
    budget = as_tensor(s)
    n_heads = p.shape[-1]
    if budget.ndim == p.ndim - 1 and budget.ndim > 0:
        budget = budget.reshape((*budget.shape, 1))
    return budget * float(n_heads) * p


def active_head_count(s: float, n_heads: int) -> int:
    """k = max(1, floor(s * H))."""
    return max(1, math.floor(s * n_heads))


def select_top_k(p: ArrayLike, s: float, k: int | None = None) -> tuple[int, NDArray[np.bool_]]:
    """Mask of the k most probable heads, ties broken toward the lower index.

    ``k`` defaults to ``max(1, floor(s * H))``; passing it forces the count.
    """
    probs = np.asarray(p, dtype=np.float64)
    if probs.ndim != 1:
        raise DimensionError(f"select_top_k expects one head distribution, got {probs.shape}")
    if not 0.0 < s <= 1.0:
        raise ParameterError(f"budget must lie in (0, 1], got {s}")
    n_heads = probs.shape[0]
    count = active_head_count(s, n_heads) if k is None else k
    if not 1 <= count <= n_heads:
        raise ParameterError(f"active head count must lie in [1, {n_heads}], got {count}")
    mask = np.zeros(n_heads, dtype=bool)
    mask[np.argsort(-probs, kind="stable")[:count]] = True
    return count, mask


# Budgeted attention ---------------------------------------------------------


def _gate(
    h: Tensor,
    nets: BudgetNets,
    t: int,
    cfg: ScheduleConfig,
    rng: np.random.Generator | None,
    mode: Mode,
    override: GatingOverride,
) -> tuple[Tensor, Tensor, Tensor]:
    """Return (s, z, p) for a batch of summaries, honouring ablation overrides."""
    batch = h.shape[0]
    if override.budget is not None:
        budget = np.broadcast_to(np.asarray(override.budget, dtype=np.float64), (batch,))
        s = Tensor._wrap(budget.copy())
    else:
        s = compute_budget(h, nets)
    if override.random_gating:
        if rng is None:
            raise ContractError("random gating needs a random generator")
        z = Tensor._wrap(rng.standard_normal((batch, nets.n_heads)))
    else:
        z = head_scores(h, nets, t, cfg, rng, mode)
    return s, z, head_probs(z, t, cfg)


def budgeted_attention(
    x: Tensor,
    params: AttentionParams,
    nets: BudgetNets,
    pad_mask: ArrayLike,
    t: int,
    cfg: ScheduleConfig,
    rng: np.random.Generator | None,
    mode: Mode,
    override: GatingOverride | None = None,
    summary: Tensor | None = None,
    path: AttentionPath = "auto",
    return_attention: bool = False,
) -> AttentionOutput:
    """Budgeted multi-head attention for a batch ``x`` of shape (B, N, D).

    ``summary`` is the pooled input the gating networks read; it defaults to
    the masked mean of ``x``. In inference mode ``path`` chooses between the
    mask path (compute all heads, zero the inactive ones) and the skip path
    (compute active heads only, batch size 1). ``auto`` skips for B == 1.
    """
    _check_input(x, params)
    if nets.n_heads != params.n_heads:
        raise DimensionError(
            f"gating network has {nets.n_heads} outputs for {params.n_heads} heads"
        )
    override = override or GatingOverride()
    batch, n_tokens, _ = x.shape
    key_mask = _key_mask(pad_mask, batch, n_tokens)
    h = summary if summary is not None else masked_mean_pool(x, key_mask)

    s, z, p = _gate(h, nets, t, cfg, rng, mode, override)
    w = head_weights(s, p)

    selections: list[HeadSelection] = []
    masks = np.zeros((batch, params.n_heads), dtype=bool)
    force_k = override.force_k if mode == Mode.INFERENCE else None
    for b in range(batch):
        budget = float(s.data[b])
        k, mask = select_top_k(p.data[b], budget, force_k)
        masks[b] = mask
        selections.append(
            HeadSelection(
                s=budget,
                z=z.data[b].copy(),
                p=p.data[b].copy(),
                w=w.data[b].copy(),
                mask=mask,
                k=k,
            )
        )

    if mode == Mode.TRAIN:
        weights = w
    else:
        if path == "skip" or (path == "auto" and batch == 1):
            if batch != 1:
                raise ContractError("the skip path runs one example at a time")
            out, attention = _skip_path(x, params, key_mask, w, masks[0], return_attention)
            return AttentionOutput(out, selections, s, p, attention)
        weights = w * masks.astype(np.float64)

    contexts, probs = _all_head_contexts(x, params, key_mask)
    weighted = contexts * weights.reshape((batch, params.n_heads, 1, 1))
    out = _merge_heads(weighted) @ params.w_o
    attention = None
    if return_attention:
        attention = probs.numpy()
        if mode == Mode.INFERENCE:
            attention = attention * masks[:, :, None, None]
    return AttentionOutput(out, selections, s, p, attention)


def _skip_path(
    x: Tensor,
    params: AttentionParams,
    key_mask: NDArray[np.bool_],
    w: Tensor,
    mask: NDArray[np.bool_],
    return_attention: bool,
) -> tuple[Tensor, Array | None]:
    """Inference for one example computing only active heads.

    Each active head projects its own slice of Q, K, V and of the output
    rows of W_O; inactive heads are never touched.
    """
    d_h = params.head_dim
    n_tokens = x.shape[1]
    attention = (
        np.zeros((1, params.n_heads, n_tokens, n_tokens)) if return_attention else None
    )
    out: Tensor | None = None
    for head in np.flatnonzero(mask):
        cols = slice(int(head) * d_h, (int(head) + 1) * d_h)
        q = x @ params.w_q[:, cols]
        k = x @ params.w_k[:, cols]
        v = x @ params.w_v[:, cols]
        scores = (q @ k.transpose((0, 2, 1))) * (1.0 / math.sqrt(d_h))
        probs = softmax(scores, axis=-1, mask=key_mask[:, None, :])
        head_out = ((probs @ v) * w[0, int(head)]) @ params.w_o[cols, :]
        out = head_out if out is None else out + head_out
        if attention is not None:
            attention[0, int(head)] = probs.data[0]
    if out is None:
        raise ContractError("skip path needs at least one active head")
    return out, attention
