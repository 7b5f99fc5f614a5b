"""Padded mini-batches with seeded per-epoch shuffling."""

from __future__ import annotations

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from budgetformer.data.vocab import PAD_ID
from budgetformer.errors import ParameterError
from budgetformer.models.example import ClassifiedExample, Tier


@dataclass
class Batch:
    """Examples padded to the longest member; mask 1 marks real tokens."""

    token_ids: NDArray[np.int64]
    pad_mask: NDArray[np.int8]
    labels: NDArray[np.int64]
    indices: NDArray[np.int64]
    tiers: list[Tier | None]

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def lengths(self) -> list[int]:
        return [int(n) for n in self.pad_mask.sum(axis=1)]


def collate(examples: Sequence[ClassifiedExample], indices: Sequence[int]) -> Batch:
    width = max(len(ex.token_ids) for ex in examples)
    token_ids = np.full((len(examples), width), PAD_ID, dtype=np.int64)
    pad_mask = np.zeros((len(examples), width), dtype=np.int8)
    for row, ex in enumerate(examples):
        token_ids[row, : len(ex.token_ids)] = ex.token_ids
        pad_mask[row, : len(ex.pad_mask)] = ex.pad_mask
    return Batch(
        token_ids=token_ids,
        pad_mask=pad_mask,
        labels=np.array([ex.label for ex in examples], dtype=np.int64),
        indices=np.asarray(indices, dtype=np.int64),
        tiers=[ex.tier for ex in examples],
    )


def steps_per_epoch(n_examples: int, batch_size: int) -> int:
    return math.ceil(n_examples / batch_size)


def batcher(
    examples: Sequence[ClassifiedExample],
    batch_size: int,
    seed: int = 0,
    shuffle: bool = False,
    epoch: int = 0,
) -> Iterator[Batch]:
    """Yield padded batches; the shuffle permutation depends only on (seed, epoch)."""
    if batch_size < 1:
        raise ParameterError(f"batch_size must be positive, got {batch_size}")
    order = np.arange(len(examples))
    if shuffle:
        order = np.random.default_rng([seed, epoch]).permutation(len(examples))
    for start in range(0, len(order), batch_size):
        chunk = [int(i) for i in order[start : start + batch_size]]
        yield collate([examples[i] for i in chunk], chunk)
