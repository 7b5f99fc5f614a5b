"""Configuration and record schemas for BudgetFormer."""

from budgetformer.models.config import (
    AblationMode,
    AttentionKind,
    BudgetLossConfig,
    ModelConfig,
    ScheduleConfig,
    SignMode,
    TrainConfig,
)
from budgetformer.models.example import (
    TIERS,
    ClassifiedExample,
    SyntheticTaskKind,
    SyntheticTaskSpec,
    Tier,
)
from budgetformer.models.reports import (
    CostMode,
    CostReport,
    LossBreakdown,
    MetricsKind,
    MetricsRecord,
)
from budgetformer.models.run import RESOLVED_CONFIG_NAME, RunConfig

__all__ = [
    "RESOLVED_CONFIG_NAME",
    "TIERS",
    "AblationMode",
    "AttentionKind",
    "BudgetLossConfig",
    "ClassifiedExample",
    "CostMode",
    "CostReport",
    "LossBreakdown",
    "MetricsKind",
    "MetricsRecord",
    "ModelConfig",
    "RunConfig",
    "ScheduleConfig",
    "SignMode",
    "SyntheticTaskKind",
    "SyntheticTaskSpec",
    "Tier",
    "TrainConfig",
]
