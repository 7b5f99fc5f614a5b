"""Classification examples and synthetic task descriptions."""

from __future__ import annotations

from enum import StrEnum

from pydantic import BaseModel, Field, model_validator


class Tier(StrEnum):
    """Input difficulty tier."""

    SIMPLE = "simple"
    MEDIUM = "medium"
    HARD = "hard"


TIERS: tuple[Tier, ...] = (Tier.SIMPLE, Tier.MEDIUM, Tier.HARD)


class SyntheticTaskKind(StrEnum):
    """Synthetic classification tasks with controllable difficulty."""

    # Label = which class marker token occurs; tier = number of look-alike distractors
    KEYWORD_DETECTION = "keyword_detection"
    # Label = sum of digit tokens mod C; tier = how many digits must be combined
    COMPOSITION = "composition"


class ClassifiedExample(BaseModel):
    """One tokenized input with its label."""

    token_ids: list[int] = Field(..., min_length=1, description="Token ids")
    pad_mask: list[int] = Field(..., min_length=1, description="1 for real tokens, 0 for padding")
    label: int = Field(..., ge=0, description="Class index")
    tier: Tier | None = Field(None, description="Difficulty tier, synthetic data only")

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def mask_matches_tokens(self) -> ClassifiedExample:
        if len(self.pad_mask) != len(self.token_ids):
            raise ValueError(
                f"pad_mask length {len(self.pad_mask)} != token_ids length {len(self.token_ids)}"
            )
        if any(bit not in (0, 1) for bit in self.pad_mask):
            raise ValueError("pad_mask must be binary")
        if 1 not in self.pad_mask:
            raise ValueError("pad_mask must contain at least one real token")
        return self

    @property
    def length(self) -> int:
        return sum(self.pad_mask)


class SyntheticTaskSpec(BaseModel):
    """Declaration of a synthetic task in the run configuration."""

    kind: SyntheticTaskKind = Field(SyntheticTaskKind.KEYWORD_DETECTION)
    n_classes: int = Field(4, ge=2, le=26, description="Number of classes C")
    max_len: int = Field(32, ge=8, description="Longest generated sequence")
    filler_vocab: int = Field(40, ge=4, description="Distinct filler words")

    model_config = {"extra": "forbid"}
