"""AdamW with decoupled weight decay and bias correction."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from budgetformer.autograd import Tensor
from budgetformer.autograd.tensor import Array
from budgetformer.errors import DimensionError
from budgetformer.models.config import TrainConfig

logger = logging.getLogger(__name__)


@dataclass
class AdamWState:
    """First and second moments per parameter name, plus the update count."""

    step: int = 0
    first_moment: dict[str, Array] = field(default_factory=dict)
    second_moment: dict[str, Array] = field(default_factory=dict)


def adamw_step(
    params: Sequence[tuple[str, Tensor]],
    grads: Sequence[Array | None],
    state: AdamWState,
    cfg: TrainConfig,
) -> bool:
    """Apply one AdamW update in place.

    Parameters whose gradient is None are frozen for this step (no decay
    either). Returns False, leaving parameters and state untouched, when any
    gradient is non-finite.
    """
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} parameters but {len(grads)} gradients")
    for (name, param), grad in zip(params, grads, strict=True):
        if grad is None:
            continue
        if grad.shape != param.shape:
            raise DimensionError(
                f"gradient for {name} has shape {grad.shape}, parameter has {param.shape}"
            )
        if not np.all(np.isfinite(grad)):
            logger.warning("Non-finite gradient in %s; skipping optimizer step", name)
            return False

    state.step += 1
    beta1, beta2 = cfg.adam_beta1, cfg.adam_beta2
    correction1 = 1.0 - beta1**state.step
    correction2 = 1.0 - beta2**state.step
    lr = cfg.learning_rate
    for (name, param), grad in zip(params, grads, strict=True):
        if grad is None:
            continue
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or v is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        denom = np.sqrt(v / correction2) + cfg.adam_epsilon
        param.data = param.data * (1.0 - lr * cfg.weight_decay) - lr * (m / correction1) / denom
    return True


class AdamW:
    """Optimizer over a fixed list of named parameters."""

    def __init__(self, params: Sequence[tuple[str, Tensor]], cfg: TrainConfig) -> None:
        self.params = list(params)
        self.cfg = cfg
        self.state = AdamWState()

    def zero_grad(self) -> None:
        for _, param in self.params:
            param.zero_grad()

    def step(self) -> bool:
        return adamw_step(self.params, [p.grad for _, p in self.params], self.state, self.cfg)
