"""Analytic FLOPs, activation-memory and carbon-proxy accounting.

Counting convention: one multiply-add is 2 FLOPs, so a (m x n) @ (n x p)
product costs 2mnp. Bias additions, residual adds, scaling and pooling are
free. Nonlinearities (softmax, layer norm, GELU, ReLU, sigmoid) cost one FLOP
per output element and are reported in a separate ``flops_other`` bucket.
"""

from __future__ import annotations

from collections.abc import Sequence
from fractions import Fraction

from budgetformer.engine.attention import HeadSelection
from budgetformer.errors import ContractError, DimensionError, ParameterError
from budgetformer.models.config import AttentionKind, ModelConfig
from budgetformer.models.reports import CostMode, CostReport


def _check_heads(d_model: int, n_heads: int, k_active: int) -> int:
    if n_heads < 1 or d_model % n_heads != 0:
        raise ParameterError(f"d_model ({d_model}) must be divisible by n_heads ({n_heads})")
    if not 1 <= k_active <= n_heads:
        raise ParameterError(f"active heads must lie in [1, {n_heads}], got {k_active}")
    return d_model // n_heads


def attention_flops(
    batch: int, n_tokens: int, d_model: int, n_heads: int, k_active: int
) -> tuple[int, int]:
    """(projection, attention) FLOPs of one attention layer.

    Projection covers Q, K, V and output projections: B * 8 * N * D^2.
    Attention covers scores and probability-value products of the active
    heads: B * k * 4 * N^2 * d_h.
    """
    head_dim = _check_heads(d_model, n_heads, k_active)
    projection = batch * 8 * n_tokens * d_model * d_model
    attention = batch * k_active * 4 * n_tokens * n_tokens * head_dim
    return projection, attention


def budget_net_flops(batch: int, d_model: int, n_heads: int) -> int:
    """f_theta (D -> D -> 1) plus g_phi (D -> H) for ``batch`` examples."""
    return batch * (2 * (d_model * d_model + d_model * 1) + 2 * d_model * n_heads)


def feedforward_flops(batch: int, n_tokens: int, d_model: int, hidden: int) -> int:
    return batch * 4 * n_tokens * d_model * hidden


def classifier_flops(batch: int, d_model: int, n_classes: int) -> int:
    return batch * 2 * d_model * n_classes


def attention_memory(batch: int, n_tokens: int, k_active: int) -> int:
    """Score/probability map activations: B * k * N^2."""
    return batch * k_active * n_tokens * n_tokens


def inference_ratio(k_per_layer: Sequence[int], n_heads: int) -> float:
    """Mean over layers of k / H."""
    if not k_per_layer:
        raise ContractError("inference_ratio needs at least one layer")
    for k in k_per_layer:
        if not 1 <= k <= n_heads:
            raise ParameterError(f"active heads must lie in [1, {n_heads}], got {k}")
    return float(Fraction(sum(k_per_layer), len(k_per_layer) * n_heads))


def carbon_proxy(flops_total: int, grams_per_flop: float) -> float:
    """Grams CO2-equivalent, proportional to FLOPs."""
    if grams_per_flop < 0:
        raise ParameterError(f"grams_per_flop must be non-negative, got {grams_per_flop}")
    return flops_total * grams_per_flop


def model_cost(
    cfg: ModelConfig,
    lengths: Sequence[int],
    selections: Sequence[Sequence[HeadSelection]] | None = None,
    mode: CostMode = CostMode.INFERENCE,
    grams_per_flop: float = 0.0,
) -> CostReport:
    """Cost of running the classifier over examples of the given unpadded lengths.

    Training charges all H heads plus the budget networks. Inference of a
    budgeted model charges each example's realized k per layer, which
    ``selections`` (indexed [layer][example]) must provide.

    ``ratio_attention`` and ``memory_ratio`` are ratios of totals, so each
    example weighs in proportion to N^2. They equal mean(k) / H only when all
    lengths are equal; the unweighted figure is ``mean_k / n_heads``.
    """
    lengths = [int(n) for n in lengths]
    if not lengths:
        raise ContractError("model_cost needs at least one example")
    budgeted = cfg.attention_kind == AttentionKind.BUDGETED
    if budgeted and mode == CostMode.INFERENCE and selections is None:
        raise ContractError("budgeted inference cost needs head selections")
    if selections is not None:
        if len(selections) != cfg.n_layers or any(len(row) != len(lengths) for row in selections):
            raise DimensionError(
                f"selections must be indexed [{cfg.n_layers} layers][{len(lengths)} examples]"
            )

    d, h, n_classes = cfg.d_model, cfg.n_heads, cfg.n_classes
    hidden = cfg.ffn_multiplier * d
    batch = len(lengths)
    projection = attention = full_attention = 0
    memory = full_memory = feedforward = other = 0
    for layer in range(cfg.n_layers):
        for b, n in enumerate(lengths):
            k = h
            if budgeted and mode == CostMode.INFERENCE and selections is not None:
                k = selections[layer][b].k
            proj, attn = attention_flops(1, n, d, h, k)
            projection += proj
            attention += attn
            full_attention += attention_flops(1, n, d, h, h)[1]
            memory += attention_memory(1, n, k)
            full_memory += attention_memory(1, n, h)
            feedforward += feedforward_flops(1, n, d, hidden)
            # two layer norms, attention softmax of the active heads, GELU
            other += 2 * n * d + k * n * n + n * hidden
            if budgeted:
                # ReLU, sigmoid, head softmax
                other += d + 1 + h

    budget_nets = cfg.n_layers * budget_net_flops(batch, d, h) if budgeted else 0
    classifier = classifier_flops(batch, d, n_classes)
    total = projection + attention + budget_nets + feedforward + classifier

    s_mean: float | None = None
    mean_k = float(h)
    if selections is not None and budgeted:
        flat = [sel for row in selections for sel in row]
        s_mean = sum(sel.s for sel in flat) / len(flat)
        if mode == CostMode.INFERENCE:
            mean_k = float(Fraction(sum(sel.k for sel in flat), len(flat)))

    return CostReport(
        mode=mode,
        attention_kind=cfg.attention_kind,
        n_examples=batch,
        flops_projection=projection,
        flops_attention=attention,
        flops_budget_nets=budget_nets,
        flops_feedforward=feedforward,
        flops_classifier=classifier,
        flops_total=total,
        flops_other=other,
        memory_attention=memory,
        memory_ratio=float(Fraction(memory, full_memory)),
        ratio_attention=float(Fraction(attention, full_attention)),
        carbon_proxy=carbon_proxy(total, grams_per_flop),
        s_mean=s_mean,
        mean_k=mean_k,
    )
