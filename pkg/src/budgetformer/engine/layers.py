"""Parameter containers shared by the encoder and the budget networks."""

from __future__ import annotations

from collections.abc import Iterator

import numpy as np

from budgetformer.autograd import Tensor, embedding, gelu, layer_norm
from budgetformer.autograd.functional import LAYER_NORM_EPS
from budgetformer.autograd.tensor import Array


class Module:
    """Base class that finds parameters among its attributes.

    Parameters are :class:`Tensor` attributes with ``requires_grad`` set;
    submodules and lists of submodules are walked recursively in attribute
    order, producing dotted names such as ``blocks.0.attention.w_q``.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for attr, value in vars(self).items():
            name = f"{prefix}{attr}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{name}.")
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def init_weight(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    """Normal init with std fan_in**-0.5."""
    data: Array = rng.normal(0.0, fan_in**-0.5, size=(fan_in, fan_out))
    return Tensor(data, requires_grad=True)


def zeros_param(*shape: int) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


class Linear(Module):
    """y = x @ W + b with W of shape (in, out)."""

    def __init__(
        self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True
    ) -> None:
        self.weight = init_weight(rng, in_features, out_features)
        self.bias: Tensor | None = zeros_param(out_features) if bias else None

    @property
    def in_features(self) -> int:
        return self.weight.shape[0]

    @property
    def out_features(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim == 1:
            return self(x.reshape((1, x.shape[0]))).reshape((self.out_features,))
        out = x @ self.weight
        return out if self.bias is None else out + self.bias


class LayerNorm(Module):
    def __init__(self, width: int, eps: float = LAYER_NORM_EPS) -> None:
        self.gain = Tensor(np.ones(width), requires_grad=True)
        self.bias = zeros_param(width)
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, self.eps)


class Embedding(Module):
    def __init__(self, count: int, width: int, rng: np.random.Generator) -> None:
        self.weight = Tensor(rng.normal(0.0, 0.02, size=(count, width)), requires_grad=True)

    def __call__(self, ids: np.ndarray) -> Tensor:
        return embedding(self.weight, ids)


class FeedForward(Module):
    """Position-wise D -> multiplier*D -> D network with GELU."""

    def __init__(self, width: int, multiplier: int, rng: np.random.Generator) -> None:
        self.expand = Linear(width, multiplier * width, rng)
        self.project = Linear(multiplier * width, width, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.project(gelu(self.expand(x)))
