"""Word-level frequency vocabulary with reserved PAD and UNK ids."""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Iterable
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field, PrivateAttr, model_validator

from budgetformer.errors import DataError

PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_ID = 0
UNK_ID = 1

_TOKEN_PATTERN = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase, then split into word runs and single punctuation marks."""
    return _TOKEN_PATTERN.findall(text.lower())


class Vocabulary(BaseModel):
    """Token list whose positions are the ids; PAD is 0 and UNK is 1."""

    tokens: list[str] = Field(..., min_length=2, description="Token for each id")

    model_config = {"extra": "forbid"}

    _index: dict[str, int] = PrivateAttr(default_factory=dict)

    @model_validator(mode="after")
    def reserved_tokens_first(self) -> Vocabulary:
        if self.tokens[PAD_ID] != PAD_TOKEN or self.tokens[UNK_ID] != UNK_TOKEN:
            raise ValueError(f"ids 0 and 1 must be {PAD_TOKEN!r} and {UNK_TOKEN!r}")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary tokens must be unique")
        return self

    def model_post_init(self, __context: Any) -> None:
        self._index = {token: i for i, token in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def token_id(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def encode_tokens(self, tokens: Iterable[str]) -> list[int]:
        return [self.token_id(token) for token in tokens]

    def encode(self, text: str) -> list[int]:
        """Token ids of ``text``; empty text encodes to a single UNK."""
        return self.encode_tokens(tokenize(text)) or [UNK_ID]

    def save(self, path: Path | str) -> Path:
        path = Path(path)
        path.write_text(self.model_dump_json(indent=2), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path: Path | str) -> Vocabulary:
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))


def build_vocab(corpus: Iterable[str], max_size: int) -> Vocabulary:
    """Keep the ``max_size - 2`` most frequent tokens, ties broken alphabetically."""
    if max_size < 2:
        raise DataError(f"max_size must leave room for PAD and UNK, got {max_size}")
    counts: Counter[str] = Counter()
    texts = 0
    for text in corpus:
        texts += 1
        counts.update(tokenize(text))
    if texts == 0:
        raise DataError("cannot build a vocabulary from an empty corpus")
    counts.pop(PAD_TOKEN, None)
    counts.pop(UNK_TOKEN, None)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    kept = [token for token, _ in ranked[: max_size - 2]]
    return Vocabulary(tokens=[PAD_TOKEN, UNK_TOKEN, *kept])
