"""Comparison tables, analysis tables and attention dumps."""

from __future__ import annotations

import csv
import io
import json
from collections.abc import Sequence

from pydantic import BaseModel, Field

from budgetformer.engine.analysis import AttentionDump, ClassGatingRow, TierGatingRow
from budgetformer.engine.trainer import EvaluationResult
from budgetformer.models.reports import CostReport


class RunSummary(BaseModel):
    """Headline numbers of one evaluated run."""

    name: str = Field(..., description="Run label, e.g. 'standard' or 'fixed_budget_s0.5'")
    s_fixed: float | None = Field(None, description="Fixed budget of an ablation run")
    accuracy: float = Field(..., ge=0.0, le=1.0)
    s_mean: float | None = None
    mean_k: float
    mean_k_per_layer: list[float] = Field(default_factory=list)
    flops_inference: int
    ratio_attention: float
    memory_ratio: float
    carbon_proxy: float

    @classmethod
    def from_evaluation(
        cls, name: str, evaluation: EvaluationResult, s_fixed: float | None = None
    ) -> RunSummary:
        cost = evaluation.cost
        return cls(
            name=name,
            s_fixed=s_fixed,
            accuracy=evaluation.accuracy,
            s_mean=evaluation.record.s_mean,
            mean_k=cost.mean_k,
            mean_k_per_layer=evaluation.record.mean_k_per_layer,
            flops_inference=cost.flops_total,
            ratio_attention=cost.ratio_attention,
            memory_ratio=cost.memory_ratio,
            carbon_proxy=cost.carbon_proxy,
        )


RUN_COLUMNS = [
    "name",
    "s_fixed",
    "accuracy",
    "s_mean",
    "mean_k",
    "mean_k_per_layer",
    "flops_inference",
    "ratio_attention",
    "memory_ratio",
    "carbon_proxy",
]


def _blank(value: object) -> object:
    return "" if value is None else value


def _render(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_blank(v) for v in row])
    return output.getvalue()


def export_runs_csv(summaries: Sequence[RunSummary]) -> str:
    """One row per run: the fixed-budget grid or the standard-vs-budgeted comparison."""
    rows = [
        [
            s.name,
            s.s_fixed,
            s.accuracy,
            s.s_mean,
            s.mean_k,
            " ".join(f"{k:g}" for k in s.mean_k_per_layer),
            s.flops_inference,
            s.ratio_attention,
            s.memory_ratio,
            s.carbon_proxy,
        ]
        for s in summaries
    ]
    return _render(RUN_COLUMNS, rows)


def export_side_by_side_csv(left: RunSummary, right: RunSummary) -> str:
    """Metric rows with one column per run, e.g. learned versus random gating."""
    metrics = ["accuracy", "s_mean", "mean_k", "flops_inference", "ratio_attention"]
    rows = [[m, getattr(left, m), getattr(right, m)] for m in metrics]
    return _render(["metric", left.name, right.name], rows)


def export_class_table_csv(rows: Sequence[ClassGatingRow]) -> str:
    return _render(
        ["layer", "label", "count", "s_mean", "s_std", "entropy_mean"],
        [[r.layer, r.label, r.count, r.s_mean, r.s_std, r.entropy_mean] for r in rows],
    )


def export_tier_table_csv(rows: Sequence[TierGatingRow]) -> str:
    return _render(
        ["layer", "tier", "count", "s_mean", "s_std", "s_min", "s_median", "s_max", "mean_k"],
        [
            [
                r.layer,
                r.tier.value,
                r.count,
                r.s_mean,
                r.s_std,
                r.s_min,
                r.s_median,
                r.s_max,
                r.mean_k,
            ]
            for r in rows
        ],
    )


def export_layer_table_csv(layer_s_mean: Sequence[float]) -> str:
    return _render(["layer", "s_mean"], [[i, s] for i, s in enumerate(layer_s_mean)])


def export_attention_json(dump: AttentionDump) -> str:
    return json.dumps(dump.to_dict(), indent=2)


def export_cost_report_json(cost: CostReport) -> str:
    return cost.model_dump_json(indent=2)
