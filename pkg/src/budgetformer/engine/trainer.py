"""Training loop, evaluation and ablation gating policies."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from budgetformer.autograd import Tape
from budgetformer.autograd.tensor import Array
from budgetformer.data.batching import Batch, batcher, steps_per_epoch
from budgetformer.engine.attention import GatingOverride, HeadSelection, Mode
from budgetformer.engine.checkpoint import load_checkpoint, save_checkpoint
from budgetformer.engine.cost import model_cost
from budgetformer.engine.encoder import EncoderClassifier
from budgetformer.engine.objective import budget_loss, cross_entropy, entropy_loss, total_loss
from budgetformer.engine.optim import AdamW
from budgetformer.errors import ContractError, DimensionError, DivergenceError
from budgetformer.models.config import AblationMode, TrainConfig
from budgetformer.models.example import ClassifiedExample
from budgetformer.models.reports import (
    CostMode,
    CostReport,
    LossBreakdown,
    MetricsKind,
    MetricsRecord,
)

logger = logging.getLogger(__name__)

# Seed stream reserved for inference-time randomness (random gating only)
EVAL_STREAM = 1_000_003
EVAL_BATCH_SIZE = 64

CHECKPOINT_DIR = "checkpoints"
BEST_CHECKPOINT = "best.bin"
FINAL_CHECKPOINT = "final.bin"
LAST_GOOD_CHECKPOINT = "last_good.bin"

MetricsSink = Callable[[MetricsRecord], None]


class GatingPolicy:
    """Per-batch gating overrides for an ablation mode.

    ``fixed_budget`` pins s to ``s_fixed``. ``random_gating`` draws random head
    scores and takes s from ``s_fixed`` or, when a reference model is given,
    from that model's per-example, per-layer predictions.
    """

    def __init__(
        self,
        ablation: AblationMode = AblationMode.NONE,
        s_fixed: float | None = None,
        reference: EncoderClassifier | None = None,
    ) -> None:
        if ablation == AblationMode.FIXED_BUDGET and s_fixed is None:
            raise ContractError("fixed_budget gating needs s_fixed")
        if ablation == AblationMode.RANDOM_GATING and s_fixed is None and reference is None:
            raise ContractError("random_gating needs s_fixed or a reference model")
        if reference is not None and not reference.is_budgeted:
            raise ContractError("the reference model must use budgeted attention")
        self.ablation = ablation
        self.s_fixed = s_fixed
        self.reference = reference

    @classmethod
    def from_config(
        cls, cfg: TrainConfig, reference: EncoderClassifier | None = None
    ) -> GatingPolicy:
        """Policy of ``cfg``; a random-gating reference is loaded from its checkpoint."""
        if (
            reference is None
            and cfg.ablation == AblationMode.RANDOM_GATING
            and cfg.reference_checkpoint is not None
        ):
            reference = load_checkpoint(cfg.reference_checkpoint)
        if cfg.ablation != AblationMode.RANDOM_GATING:
            reference = None
        return cls(cfg.ablation, cfg.s_fixed, reference)

    def overrides(
        self, batch: Batch, n_layers: int, force_k: int | None = None
    ) -> list[GatingOverride] | None:
        if self.ablation == AblationMode.NONE:
            return None if force_k is None else [GatingOverride(force_k=force_k)] * n_layers
        random_gating = self.ablation == AblationMode.RANDOM_GATING
        if self.reference is not None and random_gating:
            reference = self.reference.forward(batch.token_ids, batch.pad_mask, Mode.INFERENCE)
            if len(reference.budgets) != n_layers:
                raise DimensionError(
                    f"reference model has {len(reference.budgets)} layers, model has {n_layers}"
                )
            return [
                GatingOverride(budget=s.data.copy(), random_gating=True, force_k=force_k)
                for s in reference.budgets
            ]
        return [GatingOverride(self.s_fixed, random_gating, force_k)] * n_layers


@dataclass
class SelectionStats:
    """Budget, entropy and head-count statistics over [layer][example] selections."""

    s_mean: float | None = None
    s_std: float | None = None
    mean_k: float | None = None
    s_mean_per_layer: list[float] = field(default_factory=list)
    s_std_per_layer: list[float] = field(default_factory=list)
    entropy_per_layer: list[float] = field(default_factory=list)
    mean_k_per_layer: list[float] = field(default_factory=list)


def selection_stats(selections: Sequence[Sequence[HeadSelection]]) -> SelectionStats:
    if not selections or not selections[0]:
        return SelectionStats()
    budgets = np.array([[sel.s for sel in row] for row in selections])
    counts = np.array([[sel.k for sel in row] for row in selections], dtype=np.float64)
    entropy = np.array([[sel.entropy_term for sel in row] for row in selections])
    return SelectionStats(
        s_mean=float(budgets.mean()),
        s_std=float(budgets.std()),
        mean_k=float(counts.mean()),
        s_mean_per_layer=[float(v) for v in budgets.mean(axis=1)],
        s_std_per_layer=[float(v) for v in budgets.std(axis=1)],
        entropy_per_layer=[float(v) for v in entropy.mean(axis=1)],
        mean_k_per_layer=[float(v) for v in counts.mean(axis=1)],
    )


def _stats_fields(stats: SelectionStats) -> dict[str, object]:
    return {
        "s_mean": stats.s_mean,
        "s_std": stats.s_std,
        "mean_k": stats.mean_k,
        "s_mean_per_layer": stats.s_mean_per_layer,
        "s_std_per_layer": stats.s_std_per_layer,
        "entropy_per_layer": stats.entropy_per_layer,
        "mean_k_per_layer": stats.mean_k_per_layer,
    }


@dataclass
class EvaluationResult:
    accuracy: float
    record: MetricsRecord
    cost: CostReport
    predictions: list[int]
    labels: list[int]
    selections: list[list[HeadSelection]]  # [layer][example]


def evaluate(
    model: EncoderClassifier,
    examples: Sequence[ClassifiedExample],
    policy: GatingPolicy | None = None,
    batch_size: int = EVAL_BATCH_SIZE,
    t: int | None = None,
    force_k: int | None = None,
    seed: int = 0,
    grams_per_flop: float = 0.0,
) -> EvaluationResult:
    """Inference-mode accuracy, gating statistics and cost over ``examples``.

    The schedule step defaults to the model's stored step clamped to the
    horizon. Batches of one use the skip path.
    """
    if not examples:
        raise ContractError("cannot evaluate on an empty dataset")
    step = min(model.step, model.schedule.total_steps) if t is None else t
    rng = np.random.default_rng([seed, EVAL_STREAM])
    n_layers = len(model.blocks)
    predictions: list[int] = []
    labels: list[int] = []
    lengths: list[int] = []
    selections: list[list[HeadSelection]] = [[] for _ in range(n_layers)]
    for batch in batcher(examples, batch_size):
        overrides = policy.overrides(batch, n_layers, force_k) if policy else None
        if overrides is None and force_k is not None:
            overrides = [GatingOverride(force_k=force_k)] * n_layers
        out = model.forward(batch.token_ids, batch.pad_mask, Mode.INFERENCE, step, rng=rng,
                            overrides=overrides)
        predictions.extend(int(i) for i in np.argmax(out.logits.data, axis=1))
        labels.extend(int(y) for y in batch.labels)
        lengths.extend(batch.lengths)
        for layer, row in enumerate(out.selections):
            selections[layer].extend(row)

    correct = sum(int(p == y) for p, y in zip(predictions, labels, strict=True))
    accuracy = correct / len(labels)
    layered = selections if model.is_budgeted else None
    cost = model_cost(model.config, lengths, layered, CostMode.INFERENCE, grams_per_flop)
    stats = selection_stats(selections if model.is_budgeted else [])
    record = MetricsRecord(
        kind=MetricsKind.EVALUATION,
        step=step,
        epoch=0,
        acc_val=accuracy,
        cost=cost,
        **_stats_fields(stats),  # type: ignore[arg-type]
    )
    return EvaluationResult(accuracy, record, cost, predictions, labels, selections)


@dataclass
class TrainingResult:
    model: EncoderClassifier
    total_steps: int
    best_accuracy: float
    best_epoch: int
    records: list[MetricsRecord] = field(default_factory=list)
    best_checkpoint: Path | None = None
    final_checkpoint: Path | None = None


def _snapshot(model: EncoderClassifier) -> dict[str, Array]:
    return {name: p.data.copy() for name, p in model.named_parameters()}


def _restore(model: EncoderClassifier, snapshot: dict[str, Array]) -> None:
    for name, p in model.named_parameters():
        p.data = snapshot[name].copy()


@dataclass
class _EpochTotals:
    steps: int = 0
    task: float = 0.0
    budget: float = 0.0
    entropy: float = 0.0
    correct: int = 0
    seen: int = 0

    def add(self, breakdown: LossBreakdown, correct: int, seen: int) -> None:
        self.steps += 1
        self.task += breakdown.task
        self.budget += breakdown.budget
        self.entropy += breakdown.entropy
        self.correct += correct
        self.seen += seen

    def mean_loss(self) -> LossBreakdown:
        n = max(1, self.steps)
        return LossBreakdown.from_terms(self.task / n, self.budget / n, self.entropy / n)


def train(
    model: EncoderClassifier,
    train_data: Sequence[ClassifiedExample],
    val_data: Sequence[ClassifiedExample],
    cfg: TrainConfig,
    output_dir: Path | None = None,
    sink: MetricsSink | None = None,
    reference: EncoderClassifier | None = None,
    grams_per_flop: float = 0.0,
) -> TrainingResult:
    """Train ``model`` in place with AdamW on the composite objective.

    The horizon T = epochs * ceil(len(train_data) / batch_size) replaces
    ``cfg.schedule.total_steps``. Each epoch ends with an inference-mode
    validation pass at the current step; the best validation accuracy is
    checkpointed to ``<output_dir>/checkpoints/best.bin``.

    Raises :class:`DivergenceError` when the loss is non-finite or exceeds
    ``cfg.divergence_threshold``; the model is rolled back to the last epoch
    boundary and that state is saved to ``last_good.bin``.
    """
    if not train_data:
        raise ContractError("cannot train on an empty dataset")
    total_steps = cfg.epochs * steps_per_epoch(len(train_data), cfg.batch_size)
    schedule = cfg.schedule.model_copy(update={"total_steps": total_steps})
    model.schedule = schedule
    policy = GatingPolicy.from_config(cfg, reference)
    params = list(model.named_parameters())
    optimizer = AdamW(params, cfg)
    n_layers = len(model.blocks)
    checkpoint_dir = output_dir / CHECKPOINT_DIR if output_dir is not None else None

    result = TrainingResult(model=model, total_steps=total_steps, best_accuracy=-1.0, best_epoch=0)
    last_good = _snapshot(model)
    t = 0
    logger.info("Training for %d epochs, %d steps", cfg.epochs, total_steps)

    def emit(record: MetricsRecord) -> None:
        result.records.append(record)
        if sink is not None:
            sink(record)

    def diverge(reason: str) -> DivergenceError:
        _restore(model, last_good)
        path = None
        if checkpoint_dir is not None:
            path = save_checkpoint(model, checkpoint_dir / LAST_GOOD_CHECKPOINT)
        logger.warning("Training diverged at step %d: %s", t, reason)
        return DivergenceError(f"training diverged at step {t}: {reason}", checkpoint=path)

    for epoch in range(1, cfg.epochs + 1):
        totals = _EpochTotals()
        for batch in batcher(train_data, cfg.batch_size, cfg.seed, shuffle=True, epoch=epoch):
            rng = np.random.default_rng([cfg.seed, t])
            overrides = policy.overrides(batch, n_layers)
            optimizer.zero_grad()
            with Tape() as tape:
                out = model.forward(
                    batch.token_ids, batch.pad_mask, Mode.TRAIN, t, schedule, rng, overrides
                )
                task = cross_entropy(out.logits, batch.labels)
                if not math.isfinite(task.item()):
                    raise diverge("non-finite loss")
                loss, breakdown = total_loss(
                    task,
                    [budget_loss(s, cfg.budget) for s in out.budgets],
                    [entropy_loss(p, t, schedule, cfg.sign_mode) for p in out.probs],
                )
                if not math.isfinite(breakdown.total) or breakdown.total > cfg.divergence_threshold:
                    raise diverge(f"loss {breakdown.total:.6g} above threshold")
                tape.backward(loss)
            optimizer.step()
            t += 1
            model.step = t

            correct = int((np.argmax(out.logits.data, axis=1) == batch.labels).sum())
            totals.add(breakdown, correct, len(batch))
            if t % cfg.log_interval == 0:
                stats = selection_stats(out.selections)
                emit(
                    MetricsRecord(
                        kind=MetricsKind.STEP,
                        step=t,
                        epoch=epoch,
                        loss=breakdown,
                        acc_train=correct / len(batch),
                        **_stats_fields(stats),  # type: ignore[arg-type]
                    )
                )

        evaluation = evaluate(
            model, val_data, policy, t=t, seed=cfg.seed, grams_per_flop=grams_per_flop
        )
        stats = selection_stats(evaluation.selections if model.is_budgeted else [])
        emit(
            MetricsRecord(
                kind=MetricsKind.EPOCH,
                step=t,
                epoch=epoch,
                loss=totals.mean_loss(),
                acc_train=totals.correct / max(1, totals.seen),
                acc_val=evaluation.accuracy,
                cost=evaluation.cost,
                **_stats_fields(stats),  # type: ignore[arg-type]
            )
        )
        logger.info(
            "Epoch %d/%d: loss %.4f, train acc %.4f, val acc %.4f",
            epoch,
            cfg.epochs,
            totals.mean_loss().total,
            totals.correct / max(1, totals.seen),
            evaluation.accuracy,
        )
        if evaluation.accuracy > result.best_accuracy:
            result.best_accuracy = evaluation.accuracy
            result.best_epoch = epoch
            if checkpoint_dir is not None:
                result.best_checkpoint = save_checkpoint(model, checkpoint_dir / BEST_CHECKPOINT)
        last_good = _snapshot(model)

    if checkpoint_dir is not None:
        result.final_checkpoint = save_checkpoint(model, checkpoint_dir / FINAL_CHECKPOINT)
    return result
