"""Loss, cost and metrics records written to the metrics stream."""

from __future__ import annotations

from enum import StrEnum

from pydantic import BaseModel, Field, model_validator

from budgetformer.models.config import AttentionKind


class CostMode(StrEnum):
    """Whether a cost report charges training or inference computation."""

    TRAIN = "train"
    INFERENCE = "inference"


class LossBreakdown(BaseModel):
    """Components of the composite objective for one step."""

    task: float = Field(..., ge=0.0, description="Cross-entropy")
    budget: float = Field(..., ge=0.0, description="Adaptive budget hinge penalty")
    entropy: float = Field(..., description="Scheduled entropy regularizer")
    total: float = Field(..., description="task + budget + entropy")

    model_config = {"extra": "forbid"}

    @classmethod
    def from_terms(cls, task: float, budget: float, entropy: float) -> LossBreakdown:
        return cls(task=task, budget=budget, entropy=entropy, total=task + budget + entropy)


class CostReport(BaseModel):
    """Analytic FLOPs and activation-memory accounting for one pass over a dataset.

    FLOPs follow the convention of 2 per multiply-add. ``flops_other`` counts one
    FLOP per output of softmax, layer norm, GELU, ReLU and sigmoid and is not part
    of ``flops_total``.
    """

    mode: CostMode = Field(..., description="Training or inference accounting")
    attention_kind: AttentionKind = Field(..., description="Model attention variant")
    n_examples: int = Field(..., ge=1, description="Examples charged")
    flops_projection: int = Field(..., ge=0, description="Q, K, V and output projections")
    flops_attention: int = Field(..., ge=0, description="Scores and probability-value products")
    flops_budget_nets: int = Field(0, ge=0, description="Budget and gating networks")
    flops_feedforward: int = Field(0, ge=0, description="Feed-forward sublayers")
    flops_classifier: int = Field(0, ge=0, description="Classification head")
    flops_total: int = Field(..., ge=0, description="Sum of the matmul terms above")
    flops_other: int = Field(0, ge=0, description="Nonlinearity outputs, reported separately")
    memory_attention: int = Field(..., ge=0, description="Attention map activations")
    memory_ratio: float = Field(1.0, gt=0.0, le=1.0, description="Budgeted / full-head memory")
    ratio_attention: float = Field(
        1.0, gt=0.0, le=1.0, description="Budgeted / full-head attention FLOPs"
    )
    carbon_proxy: float = Field(0.0, ge=0.0, description="flops_total x grams_per_flop")
    s_mean: float | None = Field(None, description="Mean predicted budget, when budgeted")
    mean_k: float | None = Field(None, description="Mean active heads per layer and example")

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def total_is_sum_of_parts(self) -> CostReport:
        parts = (
            self.flops_projection
            + self.flops_attention
            + self.flops_budget_nets
            + self.flops_feedforward
            + self.flops_classifier
        )
        if self.flops_total != parts:
            raise ValueError(f"flops_total {self.flops_total} != sum of parts {parts}")
        return self


class MetricsKind(StrEnum):
    STEP = "step"
    EPOCH = "epoch"
    EVALUATION = "evaluation"


class MetricsRecord(BaseModel):
    """One line of the metrics stream."""

    kind: MetricsKind = Field(..., description="Step, epoch or standalone evaluation record")
    step: int = Field(..., ge=0, description="Global optimizer step t")
    epoch: int = Field(..., ge=0, description="Epoch index, 1-based during training")
    loss: LossBreakdown | None = Field(None, description="Mean loss components")
    acc_train: float | None = Field(None, ge=0.0, le=1.0)
    acc_val: float | None = Field(None, ge=0.0, le=1.0)
    s_mean: float | None = Field(None, ge=0.0, le=1.0, description="Mean s over layers")
    s_std: float | None = Field(None, ge=0.0, description="Std of s over layers and examples")
    mean_k: float | None = Field(None, ge=1.0, description="Mean active heads")
    s_mean_per_layer: list[float] = Field(default_factory=list)
    s_std_per_layer: list[float] = Field(default_factory=list)
    entropy_per_layer: list[float] = Field(
        default_factory=list, description="Mean sum(p log p) per layer"
    )
    mean_k_per_layer: list[float] = Field(default_factory=list)
    cost: CostReport | None = Field(None, description="Cost of the validation pass")

    model_config = {"extra": "forbid"}
