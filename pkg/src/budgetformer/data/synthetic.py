"""Synthetic classification tasks with simple, medium and hard tiers.

Keyword detection: each class c has a marker token (``aaa`` for class 0,
``bbb`` for class 1, ...). Exactly one marker is planted among filler
words; harder tiers are longer and add look-alike distractor tokens.

Composition: number tokens ``n0 .. n{C-1}`` are planted among filler words
and the label is their sum mod C. The tier is how many numbers must be
combined (1, 2 or 3).

Labels and tiers are balanced by construction and the example order is a
seeded shuffle.
"""

from __future__ import annotations

import string

import numpy as np

from budgetformer.data.vocab import PAD_TOKEN, UNK_TOKEN, Vocabulary
from budgetformer.models.example import (
    TIERS,
    ClassifiedExample,
    SyntheticTaskKind,
    SyntheticTaskSpec,
    Tier,
)

# Inclusive length range per tier
TIER_LENGTHS: dict[Tier, tuple[int, int]] = {
    Tier.SIMPLE: (6, 12),
    Tier.MEDIUM: (12, 20),
    Tier.HARD: (20, 32),
}
DISTRACTORS: dict[Tier, int] = {Tier.SIMPLE: 0, Tier.MEDIUM: 2, Tier.HARD: 5}
COMPOSITION_DEPTH: dict[Tier, int] = {Tier.SIMPLE: 1, Tier.MEDIUM: 2, Tier.HARD: 3}


def marker_token(label: int) -> str:
    return string.ascii_lowercase[label] * 3


def distractor_token(label: int) -> str:
    return string.ascii_lowercase[label] * 2 + "x"


def number_token(value: int) -> str:
    return f"n{value}"


def filler_token(index: int) -> str:
    return f"w{index}"


def synthetic_vocabulary(spec: SyntheticTaskSpec) -> Vocabulary:
    """Fixed vocabulary covering every token a task can emit."""
    classes = range(spec.n_classes)
    tokens = [PAD_TOKEN, UNK_TOKEN]
    tokens += [marker_token(c) for c in classes]
    tokens += [distractor_token(c) for c in classes]
    tokens += [number_token(c) for c in classes]
    tokens += [filler_token(i) for i in range(spec.filler_vocab)]
    return Vocabulary(tokens=tokens)


def _length(tier: Tier, max_len: int, rng: np.random.Generator) -> int:
    low, high = TIER_LENGTHS[tier]
    high = min(high, max_len)
    low = min(low, high)
    return int(rng.integers(low, high + 1))


def _plant(
    length: int, planted: list[str], spec: SyntheticTaskSpec, rng: np.random.Generator
) -> list[str]:
    tokens = [filler_token(int(i)) for i in rng.integers(0, spec.filler_vocab, size=length)]
    slots = rng.choice(length, size=len(planted), replace=False)
    for slot, token in zip(slots, planted, strict=True):
        tokens[int(slot)] = token
    return tokens


def _keyword_tokens(
    label: int, tier: Tier, spec: SyntheticTaskSpec, rng: np.random.Generator
) -> list[str]:
    distractors = [
        distractor_token(int(c)) for c in rng.integers(0, spec.n_classes, size=DISTRACTORS[tier])
    ]
    length = max(_length(tier, spec.max_len, rng), 1 + len(distractors))
    return _plant(length, [marker_token(label), *distractors], spec, rng)


def _composition_tokens(
    label: int, tier: Tier, spec: SyntheticTaskSpec, rng: np.random.Generator
) -> list[str]:
    depth = COMPOSITION_DEPTH[tier]
    values = [int(v) for v in rng.integers(0, spec.n_classes, size=depth - 1)]
    values.append((label - sum(values)) % spec.n_classes)
    length = max(_length(tier, spec.max_len, rng), depth)
    return _plant(length, [number_token(v) for v in values], spec, rng)


def make_synthetic(spec: SyntheticTaskSpec, size: int, seed: int) -> list[ClassifiedExample]:
    """Generate ``size`` examples; identical (spec, size, seed) give identical data."""
    rng = np.random.default_rng(seed)
    vocab = synthetic_vocabulary(spec)
    build = (
        _keyword_tokens if spec.kind == SyntheticTaskKind.KEYWORD_DETECTION else _composition_tokens
    )
    examples: list[ClassifiedExample] = []
    for i in range(size):
        label = i % spec.n_classes
        tier = TIERS[(i // spec.n_classes) % len(TIERS)]
        ids = vocab.encode_tokens(build(label, tier, spec, rng))
        examples.append(
            ClassifiedExample(token_ids=ids, pad_mask=[1] * len(ids), label=label, tier=tier)
        )
    order = rng.permutation(size)
    return [examples[int(i)] for i in order]
