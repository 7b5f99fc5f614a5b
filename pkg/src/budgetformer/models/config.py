"""Architecture, schedule, objective and training configuration models."""

from __future__ import annotations

from enum import StrEnum
from pathlib import Path

from pydantic import BaseModel, Field, model_validator


class AttentionKind(StrEnum):
    """Attention sublayer used by every encoder block."""

    STANDARD = "standard"
    BUDGETED = "budgeted"


class SignMode(StrEnum):
    """Sign convention of the scheduled entropy regularizer."""

    # Negated term: reward entropy while beta(t) < 0, penalize it once beta(t) > 0
    PROSE_INTENT = "prose_intent"
    # beta(t) * sum(p log p) exactly as the formula is written
    AS_WRITTEN = "as_written"


class AblationMode(StrEnum):
    """Training ablations of the gating networks."""

    NONE = "none"
    FIXED_BUDGET = "fixed_budget"
    RANDOM_GATING = "random_gating"


class ModelConfig(BaseModel):
    """Encoder classifier architecture."""

    vocab_size: int = Field(..., ge=2, description="Vocabulary size including PAD and UNK")
    max_seq_len: int = Field(32, ge=1, description="Longest sequence the model accepts")
    d_model: int = Field(64, ge=1, description="Model dimension D")
    n_heads: int = Field(8, ge=1, description="Attention heads per block H")
    n_layers: int = Field(2, ge=1, description="Encoder blocks L")
    n_classes: int = Field(..., ge=2, description="Output classes C")
    attention_kind: AttentionKind = Field(
        AttentionKind.BUDGETED, description="Standard or budgeted attention"
    )
    ffn_multiplier: int = Field(4, ge=1, description="Feed-forward hidden width multiplier")
    dropout_rate: float = Field(0.1, ge=0.0, lt=1.0, description="Sublayer dropout rate")

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def heads_divide_model_dim(self) -> ModelConfig:
        """D must split evenly into H heads."""
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        return self

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


class ScheduleConfig(BaseModel):
    """Exploration to exploitation schedule constants."""

    sigma_max: float = Field(0.5, ge=0.0, description="Initial head-score noise std")
    tau_min: float = Field(0.1, gt=0.0, description="Final gating temperature")
    tau_max: float = Field(2.0, gt=0.0, description="Initial gating temperature")
    gamma: float = Field(5.0, ge=0.0, description="Temperature decay rate")
    beta_max: float = Field(0.05, ge=0.0, description="Entropy coefficient magnitude")
    total_steps: int = Field(1, ge=1, description="Horizon T in optimizer steps")

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def temperatures_ordered(self) -> ScheduleConfig:
        if not self.tau_max > self.tau_min:
            raise ValueError(
                f"tau_max ({self.tau_max}) must be greater than tau_min ({self.tau_min})"
            )
        return self


class BudgetLossConfig(BaseModel):
    """Target budget interval and adaptive penalty scale."""

    s_min: float = Field(0.1, gt=0.0, lt=1.0, description="Lower edge of the budget interval")
    s_max: float = Field(0.9, gt=0.0, lt=1.0, description="Upper edge of the budget interval")
    alpha_base: float = Field(0.001, ge=0.0, description="Base penalty coefficient")
    alpha_max: float = Field(0.05, ge=0.0, description="Penalty coefficient cap")

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def interval_and_alpha_ordered(self) -> BudgetLossConfig:
        if not self.s_min < self.s_max:
            raise ValueError(f"s_min ({self.s_min}) must be below s_max ({self.s_max})")
        if self.alpha_max < self.alpha_base:
            raise ValueError(
                f"alpha_max ({self.alpha_max}) must be at least alpha_base ({self.alpha_base})"
            )
        return self


class TrainConfig(BaseModel):
    """Optimizer, loop and ablation settings for one training run."""

    epochs: int = Field(10, ge=1, description="Training epochs")
    batch_size: int = Field(16, ge=1, description="Examples per optimizer step")
    learning_rate: float = Field(2e-5, gt=0.0, description="AdamW learning rate")
    weight_decay: float = Field(0.01, ge=0.0, description="Decoupled weight decay")
    adam_beta1: float = Field(0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_epsilon: float = Field(1e-8, gt=0.0)
    seed: int = Field(0, description="Seed for initialization, shuffling, noise and dropout")
    log_interval: int = Field(50, ge=1, description="Steps between step-level metric records")
    divergence_threshold: float = Field(1e4, gt=0.0, description="Loss above this aborts")
    budget: BudgetLossConfig = Field(default_factory=BudgetLossConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    ablation: AblationMode = Field(AblationMode.NONE, description="Gating ablation")
    s_fixed: float | None = Field(
        None, gt=0.0, le=1.0, description="Fixed budget for fixed_budget / random_gating"
    )
    reference_checkpoint: Path | None = Field(
        None, description="BudgetFormer checkpoint supplying learned s for random_gating"
    )
    sign_mode: SignMode = Field(SignMode.PROSE_INTENT, description="Entropy term sign")

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def ablation_has_budget_source(self) -> TrainConfig:
        if self.ablation == AblationMode.FIXED_BUDGET and self.s_fixed is None:
            raise ValueError("fixed_budget ablation requires s_fixed")
        if (
            self.ablation == AblationMode.RANDOM_GATING
            and self.s_fixed is None
            and self.reference_checkpoint is None
        ):
            raise ValueError("random_gating ablation requires s_fixed or reference_checkpoint")
        return self
