"""Tests for tokenization, JSONL ingestion, synthetic tasks and batching."""

import json
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from budgetformer.data import (
    PAD_ID,
    UNK_ID,
    LoadStats,
    Vocabulary,
    batcher,
    build_vocab,
    collate,
    load_jsonl,
    make_synthetic,
    prepare_data,
    read_records,
    steps_per_epoch,
    subsample,
    synthetic_vocabulary,
    tokenize,
)
from budgetformer.data.synthetic import marker_token
from budgetformer.errors import DataError, ParameterError
from budgetformer.models import ClassifiedExample, SyntheticTaskKind, SyntheticTaskSpec, Tier

# ── Helpers ──────────────────────────────────────────────────────────


def _write_jsonl(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _record(text: str, label: int) -> str:
    return json.dumps({"text": text, "label": label})


def _example(ids: list[int], label: int = 0) -> ClassifiedExample:
    return ClassifiedExample(token_ids=ids, pad_mask=[1] * len(ids), label=label)


# ══════════════════════════════════════════════════════════════════════
#  VOCABULARY
# ══════════════════════════════════════════════════════════════════════


class TestVocabulary:
    def test_tokenize_lowercases_and_splits_punctuation(self):
        assert tokenize("Hello, World!") == ["hello", ",", "world", "!"]

    def test_frequency_order_with_alphabetical_ties(self):
        vocab = build_vocab(["b a c", "a b", "a"], max_size=10)
        assert vocab.tokens == ["<pad>", "<unk>", "a", "b", "c"]

    def test_max_size_caps_tokens(self):
        vocab = build_vocab(["x y z x y x"], max_size=4)
        assert len(vocab) == 4
        assert vocab.token_id("z") == UNK_ID

    def test_encode(self):
        vocab = build_vocab(["the cat"], max_size=10)
        assert vocab.encode("The dog") == [vocab.token_id("the"), UNK_ID]
        assert vocab.encode("") == [UNK_ID]

    def test_save_and_load(self, tmp_path):
        vocab = build_vocab(["alpha beta beta"], max_size=10)
        loaded = Vocabulary.load(vocab.save(tmp_path / "vocab.json"))
        assert loaded.tokens == vocab.tokens
        assert loaded.token_id("beta") == vocab.token_id("beta")

    def test_reserved_ids(self):
        with pytest.raises(ValueError, match="ids 0 and 1"):
            Vocabulary(tokens=["<unk>", "<pad>"])

    def test_empty_corpus(self):
        with pytest.raises(DataError):
            build_vocab([], max_size=10)


# ══════════════════════════════════════════════════════════════════════
#  JSONL
# ══════════════════════════════════════════════════════════════════════


class TestJsonl:
    """One {"text", "label"} object per line."""

    def test_valid_file(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [_record("good film", 1), _record("bad", 0)])
        records = read_records(path)
        assert [(r.text, r.label, r.line) for r in records] == [
            ("good film", 1, 1),
            ("bad", 0, 2),
        ]

    def test_blank_lines_ignored(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [_record("a", 0), "", "  ", _record("b", 1)])
        stats = LoadStats()
        assert len(read_records(path, stats=stats)) == 2
        assert stats.lines == 2

    def test_few_malformed_lines_are_skipped(self, tmp_path):
        lines = [_record(f"text {i}", i % 2) for i in range(10)]
        lines.append("{not json")
        path = _write_jsonl(tmp_path / "d.jsonl", lines)
        stats = LoadStats()
        assert len(read_records(path, stats=stats)) == 10
        assert stats.malformed == 1
        assert stats.malformed_lines == [11]

    def test_too_many_malformed_lines(self, tmp_path):
        lines = [_record("ok", 0)] * 8 + ['{"text": 3, "label": 0}', '{"label": 1}']
        path = _write_jsonl(tmp_path / "d.jsonl", lines)
        with pytest.raises(DataError, match="malformed"):
            read_records(path)

    def test_label_outside_declared_classes(self, tmp_path):
        lines = [_record("ok", 0)] * 9 + [_record("bad", 5)]
        path = _write_jsonl(tmp_path / "d.jsonl", lines)
        stats = LoadStats()
        assert len(read_records(path, n_classes=3, stats=stats)) == 9
        assert stats.malformed == 1

    def test_boolean_label_rejected(self, tmp_path):
        lines = [_record("ok", 1)] * 9 + ['{"text": "x", "label": true}']
        stats = LoadStats()
        read_records(_write_jsonl(tmp_path / "d.jsonl", lines), stats=stats)
        assert stats.malformed == 1

    def test_truncation_is_counted(self, tmp_path):
        path = _write_jsonl(tmp_path / "d.jsonl", [_record("a b c d e f", 0), _record("a", 1)])
        vocab = build_vocab(["a b c d e f"], max_size=20)
        stats = LoadStats()
        examples = load_jsonl(path, vocab, max_len=4, stats=stats)
        assert [len(ex.token_ids) for ex in examples] == [4, 1]
        assert stats.truncated == 1

    def test_invalid_utf8(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_bytes(b'{"text": "\xff\xfe", "label": 0}\n')
        with pytest.raises(DataError, match="UTF-8"):
            read_records(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_records(tmp_path / "absent.jsonl")


# ══════════════════════════════════════════════════════════════════════
#  SYNTHETIC TASKS
# ══════════════════════════════════════════════════════════════════════


class TestSynthetic:
    """Keyword-detection and composition tasks with difficulty tiers."""

    def test_deterministic(self):
        spec = SyntheticTaskSpec(n_classes=4)
        assert make_synthetic(spec, 30, seed=5) == make_synthetic(spec, 30, seed=5)
        assert make_synthetic(spec, 30, seed=5) != make_synthetic(spec, 30, seed=6)

    def test_balanced_labels_and_tiers(self):
        spec = SyntheticTaskSpec(n_classes=4)
        examples = make_synthetic(spec, 120, seed=0)
        assert Counter(ex.label for ex in examples) == {0: 30, 1: 30, 2: 30, 3: 30}
        assert Counter(ex.tier for ex in examples) == {
            Tier.SIMPLE: 40,
            Tier.MEDIUM: 40,
            Tier.HARD: 40,
        }

    def test_keyword_marker_determines_label(self):
        spec = SyntheticTaskSpec(n_classes=3, filler_vocab=10)
        vocab = synthetic_vocabulary(spec)
        markers = {vocab.token_id(marker_token(c)): c for c in range(3)}
        for ex in make_synthetic(spec, 60, seed=1):
            planted = [markers[i] for i in ex.token_ids if i in markers]
            assert planted == [ex.label]

    def test_lengths_respect_max_len(self):
        spec = SyntheticTaskSpec(n_classes=4, max_len=10)
        assert max(len(ex.token_ids) for ex in make_synthetic(spec, 60, seed=2)) <= 10

    def test_composition_label_is_sum_mod_c(self):
        spec = SyntheticTaskSpec(kind=SyntheticTaskKind.COMPOSITION, n_classes=5)
        vocab = synthetic_vocabulary(spec)
        numbers = {vocab.token_id(f"n{v}"): v for v in range(5)}
        for ex in make_synthetic(spec, 45, seed=3):
            values = [numbers[i] for i in ex.token_ids if i in numbers]
            assert sum(values) % 5 == ex.label
            assert len(values) == {"simple": 1, "medium": 2, "hard": 3}[ex.tier]

    def test_no_unknown_tokens(self):
        spec = SyntheticTaskSpec(n_classes=4)
        for ex in make_synthetic(spec, 30, seed=4):
            assert UNK_ID not in ex.token_ids


# ══════════════════════════════════════════════════════════════════════
#  BATCHING AND PREPARATION
# ══════════════════════════════════════════════════════════════════════


class TestBatching:
    def test_collate_pads_to_longest(self):
        batch = collate([_example([5, 6, 7], 1), _example([8], 0)], [3, 9])
        assert batch.token_ids.tolist() == [[5, 6, 7], [8, PAD_ID, PAD_ID]]
        assert batch.pad_mask.tolist() == [[1, 1, 1], [1, 0, 0]]
        assert batch.labels.tolist() == [1, 0]
        assert batch.indices.tolist() == [3, 9]
        assert batch.lengths == [3, 1]

    def test_covers_every_example_once(self):
        examples = [_example([i + 2]) for i in range(10)]
        batches = list(batcher(examples, 4, seed=1, shuffle=True, epoch=2))
        assert [len(b) for b in batches] == [4, 4, 2]
        assert sorted(np.concatenate([b.indices for b in batches]).tolist()) == list(range(10))
        assert steps_per_epoch(10, 4) == 3

    def test_shuffle_depends_on_seed_and_epoch(self):
        examples = [_example([i + 2]) for i in range(20)]

        def order(seed: int, epoch: int) -> list[int]:
            batches = batcher(examples, 20, seed=seed, shuffle=True, epoch=epoch)
            return next(batches).indices.tolist()

        assert order(0, 1) == order(0, 1)
        assert order(0, 1) != order(0, 2)
        assert order(0, 1) != order(1, 1)

    def test_unshuffled_order(self):
        examples = [_example([i + 2]) for i in range(5)]
        assert next(batcher(examples, 5)).indices.tolist() == [0, 1, 2, 3, 4]

    def test_invalid_batch_size(self):
        with pytest.raises(ParameterError):
            next(batcher([_example([2])], 0))

    def test_subsample(self):
        examples = [_example([i + 2]) for i in range(10)]
        kept = subsample(examples, 0.3, seed=0)
        assert len(kept) == 3
        assert kept == subsample(examples, 0.3, seed=0)
        assert subsample(examples, 1.0, seed=0) is examples


class TestPrepareData:
    def test_synthetic_resolves_sizes(self, run_config):
        prepared = prepare_data(run_config)
        assert len(prepared.train) == 24
        assert len(prepared.val) == 9
        assert prepared.config.n_classes == 3
        assert prepared.config.vocab_size == len(prepared.vocab)

    def test_jsonl_builds_and_saves_vocabulary(self, tmp_path, run_config):
        train = _write_jsonl(tmp_path / "train.jsonl", [_record("great movie", 1)] * 3)
        val = _write_jsonl(tmp_path / "val.jsonl", [_record("awful movie", 0)])
        cfg = run_config.with_overrides({"train_path": train, "val_path": val})
        run_dir = tmp_path / "out"
        run_dir.mkdir()
        prepared = prepare_data(cfg, run_dir=run_dir)
        assert prepared.config.n_classes == 2
        assert prepared.config.vocab_path == run_dir / "vocab.json"
        assert prepared.val[0].token_ids[0] == UNK_ID
        assert Vocabulary.load(run_dir / "vocab.json").tokens == prepared.vocab.tokens

    def test_declared_classes_too_small(self, tmp_path, run_config):
        train = _write_jsonl(tmp_path / "train.jsonl", [_record("a", 0), _record("b", 1)])
        cfg = run_config.with_overrides({"train_path": train, "val_path": train, "n_classes": 2})
        prepared = prepare_data(cfg)
        assert prepared.config.n_classes == 2
        with pytest.raises(DataError, match="vocab_size"):
            prepare_data(cfg.with_overrides({"vocab_size": 2}))
