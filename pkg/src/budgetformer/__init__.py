"""BudgetFormer - transformer classifiers that learn how many attention heads each input needs."""

__version__ = "0.1.0"

from budgetformer.engine.encoder import EncoderClassifier, build_model
from budgetformer.models.config import ModelConfig, ScheduleConfig, TrainConfig
from budgetformer.models.run import RunConfig

__all__ = [
    "EncoderClassifier",
    "ModelConfig",
    "RunConfig",
    "ScheduleConfig",
    "TrainConfig",
    "build_model",
]
