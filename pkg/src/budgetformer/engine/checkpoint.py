"""Versioned binary checkpoint codec.

Layout (all integers little-endian)::

    b"BUDGETFM" | uint32 version | uint32 header length | JSON header
    then per parameter:
    uint32 name length | name (UTF-8) | uint32 rank | rank x uint64 extents | float64 data

The JSON header carries the model config, the gating schedule and the
global step the model was saved at.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, BinaryIO

import numpy as np
from pydantic import ValidationError

from budgetformer.engine.encoder import EncoderClassifier, build_model
from budgetformer.errors import CheckpointError
from budgetformer.models.config import ModelConfig, ScheduleConfig

MAGIC = b"BUDGETFM"
FORMAT_VERSION = 1

_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")


@dataclass
class CheckpointHeader:
    model: ModelConfig
    schedule: ScheduleConfig
    step: int


def _write_u32(f: BinaryIO, value: int) -> None:
    f.write(_U32.pack(value))


def save_checkpoint(model: EncoderClassifier, path: Path | str) -> Path:
    """Write ``model`` to ``path``; parent directories are created."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = json.dumps(
        {
            "model": model.config.model_dump(mode="json"),
            "schedule": model.schedule.model_dump(mode="json"),
            "step": model.step,
        },
        sort_keys=True,
    ).encode("utf-8")
    with path.open("wb") as f:
        f.write(MAGIC)
        _write_u32(f, FORMAT_VERSION)
        _write_u32(f, len(header))
        f.write(header)
        for name, param in model.named_parameters():
            encoded = name.encode("utf-8")
            _write_u32(f, len(encoded))
            f.write(encoded)
            _write_u32(f, param.ndim)
            for extent in param.shape:
                f.write(_U64.pack(extent))
            f.write(np.ascontiguousarray(param.data, dtype="<f8").tobytes())
    return path


class _Reader:
    def __init__(self, payload: bytes, path: Path) -> None:
        self.payload = payload
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        chunk = self.payload[self.offset : end]
        self.offset = end
        return chunk

    def u32(self) -> int:
        return int(_U32.unpack(self.take(_U32.size))[0])

    def u64(self) -> int:
        return int(_U64.unpack(self.take(_U64.size))[0])

    @property
    def exhausted(self) -> bool:
        return self.offset == len(self.payload)


def _read_header(reader: _Reader) -> CheckpointHeader:
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError(f"{reader.path}: not a BudgetFormer checkpoint (bad magic)")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{reader.path}: unsupported checkpoint version {version} (expected {FORMAT_VERSION})"
        )
    try:
        raw: dict[str, Any] = json.loads(reader.take(reader.u32()).decode("utf-8"))
        return CheckpointHeader(
            model=ModelConfig.model_validate(raw["model"]),
            schedule=ScheduleConfig.model_validate(raw["schedule"]),
            step=int(raw["step"]),
        )
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, ValidationError) as exc:
        raise CheckpointError(f"{reader.path}: corrupt checkpoint header: {exc}") from exc


def read_header(path: Path | str) -> CheckpointHeader:
    """Return only the header of a checkpoint."""
    path = Path(path)
    return _read_header(_Reader(path.read_bytes(), path))


def load_checkpoint(path: Path | str, expected: ModelConfig | None = None) -> EncoderClassifier:
    """Rebuild a model from ``path``; bitwise-exact with the saved parameters.

    Raises :class:`CheckpointError` when ``expected`` is given and differs
    from the embedded config.
    """
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    header = _read_header(reader)
    if expected is not None and expected != header.model:
        raise CheckpointError(f"{path}: checkpoint config does not match the run config")

    model = build_model(header.model, seed=0)
    model.schedule = header.schedule
    model.step = header.step
    params = dict(model.named_parameters())
    seen: set[str] = set()
    while not reader.exhausted:
        name = reader.take(reader.u32()).decode("utf-8", errors="replace")
        shape = tuple(reader.u64() for _ in range(reader.u32()))
        if name not in params:
            raise CheckpointError(f"{path}: unexpected parameter {name!r}")
        target = params[name]
        if shape != target.shape:
            raise CheckpointError(
                f"{path}: parameter {name!r} has shape {shape}, model expects {target.shape}"
            )
        count = int(np.prod(shape))
        data = np.frombuffer(reader.take(8 * count), dtype="<f8").reshape(shape)
        target.data = data.astype(np.float64)
        seen.add(name)
    missing = sorted(set(params) - seen)
    if missing:
        raise CheckpointError(f"{path}: missing parameters {', '.join(missing)}")
    return model
