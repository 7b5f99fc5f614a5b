"""Metrics stream writer: JSONL records plus a flat CSV mirror."""

from __future__ import annotations

import csv
import io
from collections.abc import Iterable
from pathlib import Path

from budgetformer.models.reports import MetricsRecord

METRICS_JSONL = "metrics.jsonl"
METRICS_CSV = "metrics.csv"

METRICS_CSV_COLUMNS = [
    "step",
    "epoch",
    "loss_total",
    "loss_task",
    "loss_budget",
    "loss_entropy",
    "acc_train",
    "acc_val",
    "s_mean",
    "s_std",
    "mean_k",
    "flops_inference",
    "ratio_attention",
]


def _cell(value: object) -> object:
    return "" if value is None else value


def metrics_csv_row(record: MetricsRecord) -> list[object]:
    """Flatten one record into the CSV column order."""
    loss = record.loss
    cost = record.cost
    values: list[object] = [
        record.step,
        record.epoch,
        loss.total if loss else None,
        loss.task if loss else None,
        loss.budget if loss else None,
        loss.entropy if loss else None,
        record.acc_train,
        record.acc_val,
        record.s_mean,
        record.s_std,
        record.mean_k,
        cost.flops_total if cost else None,
        cost.ratio_attention if cost else None,
    ]
    return [_cell(v) for v in values]


def export_metrics_csv(records: Iterable[MetricsRecord]) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(METRICS_CSV_COLUMNS)
    for record in records:
        writer.writerow(metrics_csv_row(record))
    return output.getvalue()


class MetricsWriter:
    """Append-only metrics stream in ``run_dir``; existing streams are replaced.

    Records carry no timestamps, so identical runs write identical files.
    """

    def __init__(self, run_dir: Path) -> None:
        run_dir.mkdir(parents=True, exist_ok=True)
        self.jsonl_path = run_dir / METRICS_JSONL
        self.csv_path = run_dir / METRICS_CSV
        self.jsonl_path.write_text("", encoding="utf-8")
        self.csv_path.write_text(export_metrics_csv([]), encoding="utf-8")

    def write(self, record: MetricsRecord) -> None:
        with self.jsonl_path.open("a", encoding="utf-8") as f:
            f.write(record.model_dump_json() + "\n")
        row = io.StringIO()
        csv.writer(row, lineterminator="\n").writerow(metrics_csv_row(record))
        with self.csv_path.open("a", encoding="utf-8") as f:
            f.write(row.getvalue())


def read_metrics(path: Path) -> list[MetricsRecord]:
    """Load a metrics JSONL stream."""
    lines = path.read_text(encoding="utf-8").splitlines()
    return [MetricsRecord.model_validate_json(line) for line in lines if line.strip()]
