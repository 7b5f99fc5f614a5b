"""Gating analysis: per-class and per-tier budget statistics, attention-map dumps."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from budgetformer.data.batching import collate
from budgetformer.engine.attention import HeadSelection, Mode
from budgetformer.engine.encoder import EncoderClassifier
from budgetformer.engine.trainer import (
    EVAL_BATCH_SIZE,
    EVAL_STREAM,
    EvaluationResult,
    GatingPolicy,
    evaluate,
)
from budgetformer.errors import ContractError
from budgetformer.models.example import TIERS, ClassifiedExample, Tier


@dataclass
class ClassGatingRow:
    layer: int
    label: int
    count: int
    s_mean: float | None = None
    s_std: float | None = None
    entropy_mean: float | None = None


@dataclass
class TierGatingRow:
    layer: int
    tier: Tier
    count: int
    s_mean: float
    s_std: float
    s_min: float
    s_median: float
    s_max: float
    mean_k: float


@dataclass
class HeadAttentionMap:
    head: int
    p: float | None
    w: float | None
    rows: list[list[float]]


@dataclass
class LayerAttention:
    layer: int
    s: float | None
    k: int
    heads: list[HeadAttentionMap]


@dataclass
class AttentionDump:
    """Attention of the active heads for one example, heads by descending p."""

    example_index: int
    label: int
    prediction: int
    n_tokens: int
    layers: list[LayerAttention] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "example_index": self.example_index,
            "label": self.label,
            "prediction": self.prediction,
            "n_tokens": self.n_tokens,
            "layers": [
                {
                    "layer": layer.layer,
                    "s": layer.s,
                    "k": layer.k,
                    "heads": [
                        {"head": head.head, "p": head.p, "w": head.w, "rows": head.rows}
                        for head in layer.heads
                    ],
                }
                for layer in self.layers
            ],
        }


@dataclass
class AnalysisResult:
    evaluation: EvaluationResult
    layer_s_mean: list[float]
    class_rows: list[ClassGatingRow]
    tier_rows: list[TierGatingRow]
    dumps: list[AttentionDump] = field(default_factory=list)


def _class_rows(
    selections: list[list[HeadSelection]], labels: Sequence[int], n_classes: int, n_layers: int
) -> list[ClassGatingRow]:
    rows: list[ClassGatingRow] = []
    label_array = np.asarray(labels)
    for layer in range(n_layers):
        for label in range(n_classes):
            members = np.flatnonzero(label_array == label)
            row = ClassGatingRow(layer=layer, label=label, count=int(members.size))
            if selections and members.size:
                chosen = [selections[layer][int(i)] for i in members]
                budgets = np.array([sel.s for sel in chosen])
                row.s_mean = float(budgets.mean())
                row.s_std = float(budgets.std())
                row.entropy_mean = float(np.mean([sel.entropy_term for sel in chosen]))
            rows.append(row)
    return rows


def _tier_rows(
    selections: list[list[HeadSelection]], tiers: Sequence[Tier | None]
) -> list[TierGatingRow]:
    rows: list[TierGatingRow] = []
    for layer, row in enumerate(selections):
        for tier in TIERS:
            chosen = [sel for sel, tag in zip(row, tiers, strict=True) if tag == tier]
            if not chosen:
                continue
            budgets = np.array([sel.s for sel in chosen])
            rows.append(
                TierGatingRow(
                    layer=layer,
                    tier=tier,
                    count=len(chosen),
                    s_mean=float(budgets.mean()),
                    s_std=float(budgets.std()),
                    s_min=float(budgets.min()),
                    s_median=float(np.median(budgets)),
                    s_max=float(budgets.max()),
                    mean_k=float(np.mean([sel.k for sel in chosen])),
                )
            )
    return rows


def dump_attention(
    model: EncoderClassifier,
    examples: Sequence[ClassifiedExample],
    index: int,
    policy: GatingPolicy | None = None,
    seed: int = 0,
) -> AttentionDump:
    """Inference attention maps of ``examples[index]`` over its unpadded tokens.

    Budgeted models list only the active heads, by descending p with ties
    broken by head index; standard models list every head in index order.
    """
    if not 0 <= index < len(examples):
        raise ContractError(f"example index {index} outside [0, {len(examples)})")
    batch = collate([examples[index]], [index])
    n_layers = len(model.blocks)
    overrides = policy.overrides(batch, n_layers) if policy is not None else None
    rng = np.random.default_rng([seed, EVAL_STREAM, index])
    out = model.forward(
        batch.token_ids, batch.pad_mask, Mode.INFERENCE, rng=rng, overrides=overrides,
        return_attention=True,
    )
    valid = np.flatnonzero(batch.pad_mask[0])[: model.config.max_seq_len]
    dump = AttentionDump(
        example_index=index,
        label=int(batch.labels[0]),
        prediction=int(np.argmax(out.logits.data[0])),
        n_tokens=int(valid.size),
    )
    for layer, attention in enumerate(out.attention):
        if attention is None:
            raise ContractError(f"layer {layer} returned no attention maps")
        maps = attention[0][:, valid][:, :, valid]
        if model.is_budgeted:
            selection = out.selections[layer][0]
            order = [head for head in selection.head_order() if selection.mask[head]]
            heads = [
                HeadAttentionMap(
                    head=head,
                    p=float(selection.p[head]),
                    w=float(selection.w[head]),
                    rows=maps[head].tolist(),
                )
                for head in order
            ]
            dump.layers.append(LayerAttention(layer, selection.s, selection.k, heads))
        else:
            heads = [
                HeadAttentionMap(head=head, p=None, w=None, rows=maps[head].tolist())
                for head in range(maps.shape[0])
            ]
            dump.layers.append(LayerAttention(layer, None, len(heads), heads))
    return dump


def analyze(
    model: EncoderClassifier,
    examples: Sequence[ClassifiedExample],
    policy: GatingPolicy | None = None,
    dump_indices: Sequence[int] = (),
    batch_size: int = EVAL_BATCH_SIZE,
    seed: int = 0,
) -> AnalysisResult:
    """Per-(layer, class) and per-(layer, tier) gating statistics plus attention dumps.

    The class table always has n_layers x n_classes rows; classes absent from
    ``examples`` have a zero count and no statistics.
    """
    evaluation = evaluate(model, examples, policy, batch_size=batch_size, seed=seed)
    selections = evaluation.selections if model.is_budgeted else []
    n_layers = len(model.blocks)
    layer_s_mean = [float(np.mean([sel.s for sel in row])) for row in selections]
    return AnalysisResult(
        evaluation=evaluation,
        layer_s_mean=layer_s_mean,
        class_rows=_class_rows(selections, evaluation.labels, model.config.n_classes, n_layers),
        tier_rows=_tier_rows(selections, [ex.tier for ex in examples]),
        dumps=[dump_attention(model, examples, i, policy, seed) for i in dump_indices],
    )
