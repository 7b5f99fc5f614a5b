"""Central finite-difference oracle for analytic gradients."""

from __future__ import annotations

from collections.abc import Callable, Sequence

import numpy as np

from budgetformer.autograd.tensor import Array, Tape, Tensor

DEFAULT_STEP = 1e-5


def relative_error(analytic: Array, numeric: Array) -> float:
    """Largest |analytic - numeric| / max(1, |numeric|) over all elements."""
    scale = np.maximum(1.0, np.abs(numeric))
    return float(np.max(np.abs(analytic - numeric) / scale))


def analytic_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor]) -> list[Array]:
    """Evaluate ``fn`` on a fresh tape and return d(fn)/d(input) for each input."""
    for tensor in inputs:
        tensor.requires_grad = True
        tensor.zero_grad()
    with Tape() as tape:
        loss = fn()
        tape.backward(loss)
    return [
        np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs
    ]


def numerical_gradient(
    fn: Callable[[], Tensor],
    tensor: Tensor,
    step: float = DEFAULT_STEP,
    positions: Sequence[tuple[int, ...]] | None = None,
) -> Array:
    """Central differences of scalar ``fn`` w.r.t. ``tensor``, perturbing it in place.

    Only ``positions`` are perturbed when given; the other entries stay 0.
    """
    grad = np.zeros_like(tensor.data)
    targets = positions if positions is not None else list(np.ndindex(tensor.shape))
    for position in targets:
        original = tensor.data[position]
        tensor.data[position] = original + step
        upper = fn().item()
        tensor.data[position] = original - step
        lower = fn().item()
        tensor.data[position] = original
        grad[position] = (upper - lower) / (2.0 * step)
    return grad


def check_gradients(
    fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    step: float = DEFAULT_STEP,
) -> float:
    """Return the worst relative error between analytic and numerical gradients."""
    analytic = analytic_gradients(fn, inputs)
    worst = 0.0
    for tensor, grad in zip(inputs, analytic, strict=True):
        worst = max(worst, relative_error(grad, numerical_gradient(fn, tensor, step)))
    return worst
