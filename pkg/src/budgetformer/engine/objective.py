"""Composite training objective: task loss, budget hinge penalty, scheduled entropy."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import ArrayLike

from budgetformer.autograd import Tensor, as_tensor, log_softmax, relu, xlogx
from budgetformer.engine.schedules import entropy_coefficient
from budgetformer.errors import DataError, DimensionError
from budgetformer.models.config import BudgetLossConfig, ScheduleConfig, SignMode
from budgetformer.models.reports import LossBreakdown


def cross_entropy(logits: Tensor, labels: ArrayLike) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under softmax(logits)."""
    targets = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise DimensionError(
            f"cross_entropy: logits {logits.shape} and labels {targets.shape} disagree"
        )
    n_classes = logits.shape[1]
    for i, label in enumerate(targets):
        if not 0 <= label < n_classes:
            raise DataError(f"label {label} outside [0, {n_classes})", index=i)
    picked = log_softmax(logits, axis=-1)[np.arange(targets.shape[0]), targets]
    return -picked.mean()


def budget_violation(s: float | ArrayLike, cfg: BudgetLossConfig) -> float | np.ndarray:
    """v(s) = max(0, s_min - s) + max(0, s - s_max)."""
    budget = np.asarray(s, dtype=np.float64)
    v = np.maximum(0.0, cfg.s_min - budget) + np.maximum(0.0, budget - cfg.s_max)
    return float(v) if v.ndim == 0 else v


def budget_loss(s: Tensor | float, cfg: BudgetLossConfig) -> Tensor:
    """alpha(s) * v(s)**2 with alpha(s) = min(alpha_max, alpha_base + v(s)).

    alpha is a coefficient, not differentiated through.
    """
    budget = as_tensor(s)
    v = relu(cfg.s_min - budget) + relu(budget - cfg.s_max)
    alpha = np.minimum(cfg.alpha_max, cfg.alpha_base + v.data)
    return alpha * (v * v)


def entropy_loss(
    p: Tensor,
    t: int,
    cfg: ScheduleConfig,
    sign_mode: SignMode = SignMode.PROSE_INTENT,
) -> Tensor:
    """beta(t) * sum_i p_i log p_i over the last axis.

    ``PROSE_INTENT`` negates the term so that early training (beta < 0) rewards
    spread-out head distributions and late training rewards peaked ones.
    """
    beta = entropy_coefficient(t, cfg)
    if sign_mode == SignMode.PROSE_INTENT:
        beta = -beta
    return xlogx(p).sum(axis=-1) * beta


def _layer_mean(terms: Sequence[Tensor]) -> Tensor | None:
    if not terms:
        return None
    total = terms[0].mean()
    for term in terms[1:]:
        total = total + term.mean()
    return total * (1.0 / len(terms))


def total_loss(
    task: Tensor,
    budget_terms: Sequence[Tensor] = (),
    entropy_terms: Sequence[Tensor] = (),
) -> tuple[Tensor, LossBreakdown]:
    """Task loss plus regularizers averaged over layers and batch examples.

    ``budget_terms`` and ``entropy_terms`` hold one per-example tensor per layer.
    """
    budget = _layer_mean(budget_terms)
    entropy = _layer_mean(entropy_terms)
    loss = task
    if budget is not None:
        loss = loss + budget
    if entropy is not None:
        loss = loss + entropy
    breakdown = LossBreakdown.from_terms(
        task=task.item(),
        budget=0.0 if budget is None else budget.item(),
        entropy=0.0 if entropy is None else entropy.item(),
    )
    return loss, breakdown
