"""Exception types shared across BudgetFormer modules."""

from __future__ import annotations

from pathlib import Path


class BudgetFormerError(Exception):
    """Base class for every error raised deliberately by this package."""


class DimensionError(BudgetFormerError, ValueError):
    """Operand shapes are incompatible."""


class ParameterError(BudgetFormerError, ValueError):
    """A scalar parameter is outside its valid range."""


class DegenerateInputError(BudgetFormerError, ValueError):
    """Input has no usable content (e.g. a padding mask with no active token)."""


class ContractError(BudgetFormerError, ValueError):
    """A caller violated an API pre-condition."""


class DataError(BudgetFormerError, ValueError):
    """Dataset content is invalid."""

    def __init__(self, message: str, index: int | None = None) -> None:
        super().__init__(message if index is None else f"{message} (example {index})")
        self.index = index


class CheckpointError(BudgetFormerError, ValueError):
    """A checkpoint file cannot be decoded or does not match its configuration."""


class DivergenceError(BudgetFormerError, RuntimeError):
    """Training loss became non-finite or exceeded the divergence threshold."""

    def __init__(self, message: str, checkpoint: Path | None = None) -> None:
        super().__init__(message)
        self.checkpoint = checkpoint
