"""Exploration to exploitation schedules over the global optimizer step.

All three schedules are pure functions of ``(t, cfg)``. Steps past the
horizon ``T`` are clamped to ``T``.
"""

from __future__ import annotations

import logging
import math

from budgetformer.errors import ParameterError
from budgetformer.models.config import ScheduleConfig

logger = logging.getLogger(__name__)


def training_progress(t: int, cfg: ScheduleConfig) -> float:
    """Return t/T in [0, 1], clamping steps beyond the horizon."""
    if t < 0:
        raise ParameterError(f"schedule step must be non-negative, got {t}")
    if t > cfg.total_steps:
        logger.warning(
            "Schedule step %d is past the horizon %d; clamping to the final value",
            t,
            cfg.total_steps,
        )
        return 1.0
    return t / cfg.total_steps


def noise_scale(t: int, cfg: ScheduleConfig) -> float:
    """Standard deviation of the head-score noise: sigma_max * (1 - t/T)."""
    return cfg.sigma_max * (1.0 - training_progress(t, cfg))


def temperature(t: int, cfg: ScheduleConfig) -> float:
    """Gating softmax temperature: tau_min + (tau_max - tau_min) * exp(-gamma * t/T)."""
    progress = training_progress(t, cfg)
    return cfg.tau_min + (cfg.tau_max - cfg.tau_min) * math.exp(-cfg.gamma * progress)


def entropy_coefficient(t: int, cfg: ScheduleConfig) -> float:
    """beta(t) = beta_max * (2t/T - 1); negative early, positive late."""
    return cfg.beta_max * (2.0 * training_progress(t, cfg) - 1.0)
