"""Dataset ingestion, synthetic tasks and batching."""

from budgetformer.data.batching import Batch, batcher, collate, steps_per_epoch
from budgetformer.data.jsonl import LoadStats, load_jsonl, read_records
from budgetformer.data.prepare import PreparedData, prepare_data, subsample
from budgetformer.data.synthetic import make_synthetic, synthetic_vocabulary
from budgetformer.data.vocab import PAD_ID, UNK_ID, Vocabulary, build_vocab, tokenize

__all__ = [
    "PAD_ID",
    "UNK_ID",
    "Batch",
    "LoadStats",
    "PreparedData",
    "Vocabulary",
    "batcher",
    "build_vocab",
    "collate",
    "load_jsonl",
    "make_synthetic",
    "prepare_data",
    "read_records",
    "steps_per_epoch",
    "subsample",
    "synthetic_vocabulary",
    "tokenize",
]
