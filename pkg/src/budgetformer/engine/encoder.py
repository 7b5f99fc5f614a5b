"""Encoder classifier: embeddings, L pre-norm blocks, mean pooling, linear head."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from budgetformer.autograd import Tensor, dropout, masked_mean_pool
from budgetformer.autograd.tensor import Array
from budgetformer.engine.attention import (
    AttentionOutput,
    AttentionParams,
    BudgetNets,
    GatingOverride,
    HeadSelection,
    Mode,
    budgeted_attention,
    standard_mha,
)
from budgetformer.engine.layers import Embedding, FeedForward, LayerNorm, Linear, Module
from budgetformer.errors import DataError, DimensionError
from budgetformer.models.config import AttentionKind, ModelConfig, ScheduleConfig

logger = logging.getLogger(__name__)


@dataclass
class EncoderOutput:
    """Logits plus per-layer gating records (empty lists for standard attention)."""

    logits: Tensor
    selections: list[list[HeadSelection]] = field(default_factory=list)
    budgets: list[Tensor] = field(default_factory=list)
    probs: list[Tensor] = field(default_factory=list)
    attention: list[Array | None] = field(default_factory=list)


class EncoderBlock(Module):
    """Pre-norm block: x + drop(attn(LN(x))), then x + drop(FFN(LN(x)))."""

    def __init__(
        self,
        cfg: ModelConfig,
        rng: np.random.Generator,
        budget_rng: np.random.Generator,
    ) -> None:
        self.attention_norm = LayerNorm(cfg.d_model)
        self.attention = AttentionParams(cfg.d_model, cfg.n_heads, rng)
        self.budget_nets: BudgetNets | None = (
            BudgetNets(cfg.d_model, cfg.n_heads, budget_rng)
            if cfg.attention_kind == AttentionKind.BUDGETED
            else None
        )
        self.ffn_norm = LayerNorm(cfg.d_model)
        self.feed_forward = FeedForward(cfg.d_model, cfg.ffn_multiplier, rng)
        self.dropout_rate = cfg.dropout_rate

    def __call__(
        self,
        x: Tensor,
        pad_mask: NDArray[np.bool_],
        mode: Mode,
        t: int,
        schedule: ScheduleConfig,
        rng: np.random.Generator | None,
        override: GatingOverride | None = None,
        return_attention: bool = False,
    ) -> tuple[Tensor, AttentionOutput]:
        drop_rng = rng if mode == Mode.TRAIN else None
        normed = self.attention_norm(x)
        if self.budget_nets is None:
            attended = standard_mha(normed, self.attention, pad_mask, return_attention)
        else:
            attended = budgeted_attention(
                normed,
                self.attention,
                self.budget_nets,
                pad_mask,
                t,
                schedule,
                rng,
                mode,
                override=override,
                summary=masked_mean_pool(x, pad_mask),
                return_attention=return_attention,
            )
        x = x + dropout(attended.output, self.dropout_rate, drop_rng)
        x = x + dropout(self.feed_forward(self.ffn_norm(x)), self.dropout_rate, drop_rng)
        return x, attended


class EncoderClassifier(Module):
    """Transformer encoder text classifier with optional budgeted attention.

    ``schedule`` and ``step`` hold the gating schedule and the global step the
    model was last trained at; inference reads them unless told otherwise.
    Budget networks are initialized from their own seeded stream so that a
    standard and a budgeted model built from one seed share every common weight.
    """

    def __init__(self, cfg: ModelConfig, seed: int) -> None:
        rng = np.random.default_rng([seed, 0])
        budget_rng = np.random.default_rng([seed, 1])
        self.token_embedding = Embedding(cfg.vocab_size, cfg.d_model, rng)
        self.position_embedding = Embedding(cfg.max_seq_len, cfg.d_model, rng)
        self.blocks = [EncoderBlock(cfg, rng, budget_rng) for _ in range(cfg.n_layers)]
        self.classifier = Linear(cfg.d_model, cfg.n_classes, rng)
        self.config = cfg
        self.schedule = ScheduleConfig()
        self.step = 0
        self.truncated_sequences = 0

    @property
    def is_budgeted(self) -> bool:
        return self.config.attention_kind == AttentionKind.BUDGETED

    def _prepare_inputs(
        self, token_ids: ArrayLike, pad_mask: ArrayLike
    ) -> tuple[NDArray[np.int64], NDArray[np.bool_]]:
        ids = np.asarray(token_ids, dtype=np.int64)
        mask = np.asarray(pad_mask, dtype=bool)
        if ids.ndim != 2 or ids.shape != mask.shape:
            raise DimensionError(
                f"token_ids {ids.shape} and pad_mask {mask.shape} must share a (B, N) shape"
            )
        limit = self.config.max_seq_len
        if ids.shape[1] > limit:
            overflow = int(mask[:, limit:].any(axis=1).sum())
            if overflow:
                self.truncated_sequences += overflow
                logger.warning(
                    "Truncated %d sequence(s) to %d tokens (%d so far)",
                    overflow,
                    limit,
                    self.truncated_sequences,
                )
            ids, mask = ids[:, :limit], mask[:, :limit]
        bad = (ids < 0) | (ids >= self.config.vocab_size)
        if bad.any():
            row = int(np.flatnonzero(bad.any(axis=1))[0])
            raise DataError(
                f"token id outside vocabulary of size {self.config.vocab_size}", index=row
            )
        return ids, mask

    def forward(
        self,
        token_ids: ArrayLike,
        pad_mask: ArrayLike,
        mode: Mode = Mode.INFERENCE,
        t: int | None = None,
        schedule: ScheduleConfig | None = None,
        rng: np.random.Generator | None = None,
        overrides: GatingOverride | Sequence[GatingOverride] | None = None,
        return_attention: bool = False,
    ) -> EncoderOutput:
        """Run the classifier on a padded batch.

        ``overrides`` is one override for every layer or one per layer.
        """
        ids, mask = self._prepare_inputs(token_ids, pad_mask)
        schedule = schedule or self.schedule
        step = self.step if t is None else t
        per_layer = _per_layer(overrides, len(self.blocks))

        positions = self.position_embedding(np.arange(ids.shape[1]))
        x = self.token_embedding(ids) + positions
        result = EncoderOutput(logits=x)
        for block, override in zip(self.blocks, per_layer, strict=True):
            x, attended = block(x, mask, mode, step, schedule, rng, override, return_attention)
            result.attention.append(attended.attention)
            if attended.budget is not None and attended.probs is not None:
                result.selections.append(attended.selections)
                result.budgets.append(attended.budget)
                result.probs.append(attended.probs)
        result.logits = self.classifier(masked_mean_pool(x, mask))
        return result

    __call__ = forward


def _per_layer(
    overrides: GatingOverride | Sequence[GatingOverride] | None, n_layers: int
) -> list[GatingOverride | None]:
    if overrides is None or isinstance(overrides, GatingOverride):
        return [overrides] * n_layers
    if len(overrides) != n_layers:
        raise DimensionError(f"got {len(overrides)} gating overrides for {n_layers} layers")
    return list(overrides)


def build_model(cfg: ModelConfig, seed: int) -> EncoderClassifier:
    """Build a seeded encoder classifier; same (cfg, seed) gives identical weights."""
    return EncoderClassifier(cfg, seed)


def budget_net_parameter_count(cfg: ModelConfig) -> int:
    """Parameters the budgeted variant adds: L * (D*D + D + D + 1 + D*H + H)."""
    d, h = cfg.d_model, cfg.n_heads
    return cfg.n_layers * (d * d + d + d * 1 + 1 + d * h + h)
