"""Run configuration - the flat YAML document every command starts from."""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, Field, model_validator

from budgetformer.errors import ContractError
from budgetformer.models.config import (
    AblationMode,
    AttentionKind,
    BudgetLossConfig,
    ModelConfig,
    ScheduleConfig,
    SignMode,
    TrainConfig,
)
from budgetformer.models.example import SyntheticTaskKind, SyntheticTaskSpec

RESOLVED_CONFIG_NAME = "resolved_config.yaml"


class RunConfig(BaseModel):
    """Every architecture, training, schedule, budget and data setting of one run.

    ``vocab_size`` and ``n_classes`` may be left unset in a hand-written file;
    data preparation fills them in and the resolved copy is written to the run
    directory.
    """

    # Architecture
    vocab_size: int | None = Field(None, ge=2, description="Filled in from the data if unset")
    max_seq_len: int = Field(32, ge=1, description="Longest sequence the model accepts")
    d_model: int = Field(64, ge=1, description="Model dimension D")
    n_heads: int = Field(8, ge=1, description="Attention heads per block H")
    n_layers: int = Field(2, ge=1, description="Encoder blocks L")
    n_classes: int | None = Field(None, ge=2, description="Filled in from the data if unset")
    attention_kind: AttentionKind = Field(AttentionKind.BUDGETED)
    ffn_multiplier: int = Field(4, ge=1)
    dropout_rate: float = Field(0.1, ge=0.0, lt=1.0)

    # Optimization
    epochs: int = Field(10, ge=1)
    batch_size: int = Field(16, ge=1)
    learning_rate: float = Field(2e-5, gt=0.0)
    weight_decay: float = Field(0.01, ge=0.0)
    adam_beta1: float = Field(0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(0.999, ge=0.0, lt=1.0)
    adam_epsilon: float = Field(1e-8, gt=0.0)
    seed: int = Field(0)
    log_interval: int = Field(50, ge=1)
    divergence_threshold: float = Field(1e4, gt=0.0)

    # Budget objective
    s_min: float = Field(0.1, gt=0.0, lt=1.0)
    s_max: float = Field(0.9, gt=0.0, lt=1.0)
    alpha_base: float = Field(0.001, ge=0.0)
    alpha_max: float = Field(0.05, ge=0.0)
    sign_mode: SignMode = Field(SignMode.PROSE_INTENT)

    # Schedules
    sigma_max: float = Field(0.5, ge=0.0)
    tau_min: float = Field(0.1, gt=0.0)
    tau_max: float = Field(2.0, gt=0.0)
    gamma: float = Field(5.0, ge=0.0)
    beta_max: float = Field(0.05, ge=0.0)

    # Ablations
    ablation: AblationMode = Field(AblationMode.NONE)
    s_fixed: float | None = Field(None, gt=0.0, le=1.0)
    reference_checkpoint: Path | None = Field(None)

    # Data
    train_path: Path | None = Field(None, description="JSONL training file")
    val_path: Path | None = Field(None, description="JSONL validation file")
    vocab_path: Path | None = Field(None, description="Saved vocabulary for JSONL runs")
    vocab_max_size: int = Field(10000, ge=3)
    synthetic_task: SyntheticTaskKind = Field(SyntheticTaskKind.KEYWORD_DETECTION)
    synthetic_classes: int = Field(4, ge=2, le=26)
    filler_vocab: int = Field(40, ge=4)
    train_size: int = Field(2000, ge=1)
    val_size: int = Field(500, ge=1)
    data_fraction: float = Field(1.0, gt=0.0, le=1.0, description="Share of training data used")

    # Outputs
    output_dir: Path = Field(Path("runs/budgetformer"))
    grams_per_flop: float = Field(0.0, ge=0.0, description="Carbon proxy coefficient")

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def validate_run(self) -> RunConfig:
        """Check cross-field constraints and that referenced inputs exist."""
        if (self.train_path is None) != (self.val_path is None):
            raise ValueError("train_path and val_path must be given together")
        for name in ("train_path", "val_path", "vocab_path", "reference_checkpoint"):
            path = getattr(self, name)
            if path is not None and not Path(path).exists():
                raise ValueError(f"{name} does not exist: {path}")
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        # Nested models carry the cross-field invariants; build them to surface errors.
        if self.vocab_size is not None and self.n_classes is not None:
            self.build_model_config()
        self.build_budget_config()
        self.build_train_config(total_steps=1)
        return self

    @property
    def uses_synthetic_data(self) -> bool:
        return self.train_path is None

    def synthetic_spec(self) -> SyntheticTaskSpec:
        return SyntheticTaskSpec(
            kind=self.synthetic_task,
            n_classes=self.synthetic_classes,
            max_len=self.max_seq_len,
            filler_vocab=self.filler_vocab,
        )

    def build_model_config(self) -> ModelConfig:
        if self.vocab_size is None or self.n_classes is None:
            raise ContractError("vocab_size and n_classes must be resolved before building")
        return ModelConfig(
            vocab_size=self.vocab_size,
            max_seq_len=self.max_seq_len,
            d_model=self.d_model,
            n_heads=self.n_heads,
            n_layers=self.n_layers,
            n_classes=self.n_classes,
            attention_kind=self.attention_kind,
            ffn_multiplier=self.ffn_multiplier,
            dropout_rate=self.dropout_rate,
        )

    def build_schedule_config(self, total_steps: int) -> ScheduleConfig:
        return ScheduleConfig(
            sigma_max=self.sigma_max,
            tau_min=self.tau_min,
            tau_max=self.tau_max,
            gamma=self.gamma,
            beta_max=self.beta_max,
            total_steps=total_steps,
        )

    def build_budget_config(self) -> BudgetLossConfig:
        return BudgetLossConfig(
            s_min=self.s_min,
            s_max=self.s_max,
            alpha_base=self.alpha_base,
            alpha_max=self.alpha_max,
        )

    def build_train_config(self, total_steps: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            adam_beta1=self.adam_beta1,
            adam_beta2=self.adam_beta2,
            adam_epsilon=self.adam_epsilon,
            seed=self.seed,
            log_interval=self.log_interval,
            divergence_threshold=self.divergence_threshold,
            budget=self.build_budget_config(),
            schedule=self.build_schedule_config(total_steps),
            ablation=self.ablation,
            s_fixed=self.s_fixed,
            reference_checkpoint=self.reference_checkpoint,
            sign_mode=self.sign_mode,
        )

    def with_overrides(self, overrides: Mapping[str, Any]) -> RunConfig:
        """Return a re-validated copy with ``overrides`` applied on top."""
        data = self.model_dump()
        data.update(overrides)
        return RunConfig.model_validate(data)

    @classmethod
    def from_yaml(cls, path: Path | str) -> RunConfig:
        """Load a run configuration from a YAML file."""
        path = Path(path)
        with path.open() as f:
            data = yaml.safe_load(f)
        return cls.model_validate(data or {})

    def to_yaml(self, path: Path | str) -> None:
        """Save the configuration to a YAML file."""
        path = Path(path)
        data = self.model_dump(mode="json")
        with path.open("w") as f:
            yaml.dump(data, f, default_flow_style=False, sort_keys=False)
