"""BudgetFormer model, objective, cost model and training engine."""

from budgetformer.engine.analysis import (
    AnalysisResult,
    AttentionDump,
    ClassGatingRow,
    TierGatingRow,
    analyze,
    dump_attention,
)
from budgetformer.engine.attention import (
    AttentionOutput,
    AttentionParams,
    BudgetNets,
    GatingOverride,
    HeadSelection,
    Mode,
    active_head_count,
    budgeted_attention,
    compute_budget,
    head_probs,
    head_scores,
    head_weights,
    select_top_k,
    standard_mha,
)
from budgetformer.engine.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    CheckpointHeader,
    load_checkpoint,
    read_header,
    save_checkpoint,
)
from budgetformer.engine.cost import (
    attention_flops,
    attention_memory,
    budget_net_flops,
    carbon_proxy,
    inference_ratio,
    model_cost,
)
from budgetformer.engine.counter import InstrumentedCounter, count_model
from budgetformer.engine.encoder import (
    EncoderClassifier,
    EncoderOutput,
    budget_net_parameter_count,
    build_model,
)
from budgetformer.engine.objective import (
    budget_loss,
    budget_violation,
    cross_entropy,
    entropy_loss,
    total_loss,
)
from budgetformer.engine.optim import AdamW, AdamWState, adamw_step
from budgetformer.engine.schedules import (
    entropy_coefficient,
    noise_scale,
    temperature,
    training_progress,
)
from budgetformer.engine.trainer import (
    EvaluationResult,
    GatingPolicy,
    TrainingResult,
    evaluate,
    selection_stats,
    train,
)

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "AdamW",
    "AdamWState",
    "AnalysisResult",
    "AttentionDump",
    "AttentionOutput",
    "AttentionParams",
    "BudgetNets",
    "CheckpointHeader",
    "ClassGatingRow",
    "EncoderClassifier",
    "EncoderOutput",
    "EvaluationResult",
    "GatingOverride",
    "GatingPolicy",
    "HeadSelection",
    "InstrumentedCounter",
    "Mode",
    "TierGatingRow",
    "TrainingResult",
    "active_head_count",
    "adamw_step",
    "analyze",
    "attention_flops",
    "attention_memory",
    "budget_loss",
    "budget_net_flops",
    "budget_net_parameter_count",
    "budget_violation",
    "budgeted_attention",
    "build_model",
    "carbon_proxy",
    "compute_budget",
    "count_model",
    "cross_entropy",
    "dump_attention",
    "entropy_coefficient",
    "entropy_loss",
    "evaluate",
    "head_probs",
    "head_scores",
    "head_weights",
    "inference_ratio",
    "load_checkpoint",
    "model_cost",
    "noise_scale",
    "read_header",
    "save_checkpoint",
    "select_top_k",
    "selection_stats",
    "standard_mha",
    "temperature",
    "total_loss",
    "train",
    "training_progress",
]
