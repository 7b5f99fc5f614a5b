"""JSONL ingestion: one ``{"text": str, "label": int}`` object per line."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from budgetformer.data.vocab import Vocabulary
from budgetformer.errors import DataError
from budgetformer.models.example import ClassifiedExample

logger = logging.getLogger(__name__)

MAX_MALFORMED_SHARE = 0.10


@dataclass
class TextRecord:
    text: str
    label: int
    line: int


@dataclass
class LoadStats:
    """Counters for one JSONL file."""

    lines: int = 0
    malformed: int = 0
    truncated: int = 0
    malformed_lines: list[int] = field(default_factory=list)


def _parse_line(raw: str, n_classes: int | None) -> tuple[str, int] | None:
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict):
        return None
    text, label = obj.get("text"), obj.get("label")
    if not isinstance(text, str) or isinstance(label, bool) or not isinstance(label, int):
        return None
    if label < 0 or (n_classes is not None and label >= n_classes):
        return None
    return text, label


def read_records(
    path: Path | str, n_classes: int | None = None, stats: LoadStats | None = None
) -> list[TextRecord]:
    """Parse valid lines of ``path``; malformed lines are counted and skipped.

    Raises :class:`DataError` when more than 10% of the non-blank lines are
    malformed, and ``OSError`` when the file cannot be read.
    """
    path = Path(path)
    stats = stats if stats is not None else LoadStats()
    records: list[TextRecord] = []
    try:
        with path.open(encoding="utf-8") as f:
            for number, raw in enumerate(f, start=1):
                if not raw.strip():
                    continue
                stats.lines += 1
                parsed = _parse_line(raw, n_classes)
                if parsed is None:
                    stats.malformed += 1
                    stats.malformed_lines.append(number)
                    continue
                records.append(TextRecord(text=parsed[0], label=parsed[1], line=number))
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 ({exc.reason})") from exc

    if stats.malformed:
        logger.warning(
            "Skipped %d malformed line(s) of %d in %s", stats.malformed, stats.lines, path
        )
    if stats.lines and stats.malformed > MAX_MALFORMED_SHARE * stats.lines:
        raise DataError(
            f"{path}: {stats.malformed} of {stats.lines} lines are malformed (limit 10%)",
            index=stats.malformed_lines[0],
        )
    return records


def load_jsonl(
    path: Path | str,
    vocab: Vocabulary,
    max_len: int,
    n_classes: int | None = None,
    stats: LoadStats | None = None,
) -> list[ClassifiedExample]:
    """Tokenize every valid line of ``path``, truncating to ``max_len`` tokens."""
    stats = stats if stats is not None else LoadStats()
    examples: list[ClassifiedExample] = []
    for record in read_records(path, n_classes, stats):
        ids = vocab.encode(record.text)
        if len(ids) > max_len:
            stats.truncated += 1
            ids = ids[:max_len]
        examples.append(
            ClassifiedExample(token_ids=ids, pad_mask=[1] * len(ids), label=record.label)
        )
    if stats.truncated:
        logger.warning(
            "Truncated %d example(s) in %s to %d tokens", stats.truncated, path, max_len
        )
    return examples
