"""Turn a run configuration into tokenized train and validation sets."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from budgetformer.data.jsonl import LoadStats, load_jsonl, read_records
from budgetformer.data.synthetic import make_synthetic, synthetic_vocabulary
from budgetformer.data.vocab import Vocabulary, build_vocab
from budgetformer.errors import DataError
from budgetformer.models.example import ClassifiedExample
from budgetformer.models.run import RunConfig

logger = logging.getLogger(__name__)

VOCAB_FILE = "vocab.json"


@dataclass
class PreparedData:
    train: list[ClassifiedExample]
    val: list[ClassifiedExample]
    vocab: Vocabulary
    config: RunConfig  # vocab_size and n_classes resolved


def subsample(
    examples: list[ClassifiedExample], fraction: float, seed: int
) -> list[ClassifiedExample]:
    """Keep round(fraction * n) examples (at least one), in their original order."""
    if fraction >= 1.0:
        return examples
    keep = max(1, round(fraction * len(examples)))
    chosen = np.sort(np.random.default_rng([seed, 7]).choice(len(examples), keep, replace=False))
    return [examples[int(i)] for i in chosen]


def _resolve(
    cfg: RunConfig, vocab: Vocabulary, n_classes: int, vocab_path: Path | None
) -> RunConfig:
    if cfg.vocab_size is not None and cfg.vocab_size < len(vocab):
        raise DataError(
            f"vocab_size {cfg.vocab_size} is smaller than the vocabulary ({len(vocab)})"
        )
    if cfg.n_classes is not None and cfg.n_classes < n_classes:
        raise DataError(f"n_classes {cfg.n_classes} is smaller than the data needs ({n_classes})")
    updates: dict[str, object] = {
        "vocab_size": cfg.vocab_size or len(vocab),
        "n_classes": cfg.n_classes or n_classes,
    }
    if vocab_path is not None:
        updates["vocab_path"] = vocab_path
    return cfg.with_overrides(updates)


def prepare_data(cfg: RunConfig, run_dir: Path | None = None) -> PreparedData:
    """Load or generate the data of ``cfg``.

    JSONL runs build the vocabulary from the training texts unless
    ``vocab_path`` names a saved one; with ``run_dir`` the vocabulary is
    saved there and recorded in the resolved config.
    """
    if cfg.uses_synthetic_data:
        spec = cfg.synthetic_spec()
        vocab = synthetic_vocabulary(spec)
        train = make_synthetic(spec, cfg.train_size, seed=2 * cfg.seed)
        val = make_synthetic(spec, cfg.val_size, seed=2 * cfg.seed + 1)
        resolved = _resolve(cfg, vocab, spec.n_classes, None)
    else:
        assert cfg.train_path is not None and cfg.val_path is not None
        if cfg.vocab_path is not None:
            vocab = Vocabulary.load(cfg.vocab_path)
        else:
            texts = [record.text for record in read_records(cfg.train_path, cfg.n_classes)]
            vocab = build_vocab(texts, cfg.vocab_max_size)
        vocab_path = cfg.vocab_path
        if run_dir is not None:
            vocab_path = vocab.save(run_dir / VOCAB_FILE)
        train = load_jsonl(cfg.train_path, vocab, cfg.max_seq_len, cfg.n_classes, LoadStats())
        val = load_jsonl(cfg.val_path, vocab, cfg.max_seq_len, cfg.n_classes, LoadStats())
        if not train or not val:
            raise DataError("training and validation files must each hold at least one example")
        n_classes = max(2, 1 + max(ex.label for ex in [*train, *val]))
        resolved = _resolve(cfg, vocab, n_classes, vocab_path)

    train = subsample(train, cfg.data_fraction, cfg.seed)
    logger.info(
        "Prepared %d training and %d validation examples (vocabulary %d, %d classes)",
        len(train),
        len(val),
        len(vocab),
        resolved.n_classes,
    )
    return PreparedData(train=train, val=val, vocab=vocab, config=resolved)
