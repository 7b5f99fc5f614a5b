"""Pytest configuration and fixtures."""

from pathlib import Path

import numpy as np
import pytest

from budgetformer.engine.encoder import EncoderClassifier, build_model
from budgetformer.models.config import AttentionKind, ModelConfig, ScheduleConfig
from budgetformer.models.run import RunConfig


@pytest.fixture
def rng() -> np.random.Generator:
    """Seeded generator for random test inputs."""
    return np.random.default_rng(1234)


@pytest.fixture
def model_config() -> ModelConfig:
    """Small budgeted architecture without dropout."""
    return ModelConfig(
        vocab_size=20,
        max_seq_len=8,
        d_model=16,
        n_heads=4,
        n_layers=2,
        n_classes=3,
        attention_kind=AttentionKind.BUDGETED,
        dropout_rate=0.0,
    )


@pytest.fixture
def schedule() -> ScheduleConfig:
    """Default schedule constants over a 100-step horizon."""
    return ScheduleConfig(total_steps=100)


@pytest.fixture
def budgeted_model(model_config: ModelConfig) -> EncoderClassifier:
    return build_model(model_config, seed=3)


@pytest.fixture
def standard_model(model_config: ModelConfig) -> EncoderClassifier:
    cfg = model_config.model_copy(update={"attention_kind": AttentionKind.STANDARD})
    return build_model(cfg, seed=3)


@pytest.fixture
def run_config(tmp_path: Path) -> RunConfig:
    """Tiny synthetic keyword-detection run that trains in seconds."""
    return RunConfig(
        d_model=16,
        n_heads=4,
        n_layers=1,
        dropout_rate=0.0,
        epochs=2,
        batch_size=8,
        learning_rate=1e-3,
        log_interval=2,
        synthetic_classes=3,
        filler_vocab=12,
        train_size=24,
        val_size=9,
        output_dir=tmp_path / "run",
    )


@pytest.fixture
def config_file(tmp_path: Path, run_config: RunConfig) -> Path:
    """``run_config`` written to YAML."""
    path = tmp_path / "budgetformer.yaml"
    run_config.to_yaml(path)
    return path
