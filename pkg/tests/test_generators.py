"""Tests for output generators."""

import csv
import io
import json

import pytest

from budgetformer.data import prepare_data
from budgetformer.engine.analysis import analyze
from budgetformer.engine.encoder import build_model
from budgetformer.engine.trainer import evaluate
from budgetformer.generators import (
    METRICS_CSV_COLUMNS,
    MetricsWriter,
    RunSummary,
    export_attention_json,
    export_class_table_csv,
    export_cost_report_json,
    export_layer_table_csv,
    export_metrics_csv,
    export_runs_csv,
    export_side_by_side_csv,
    export_tier_table_csv,
    read_metrics,
)
from budgetformer.generators.tables import RUN_COLUMNS
from budgetformer.models import (
    AttentionKind,
    CostMode,
    CostReport,
    LossBreakdown,
    MetricsKind,
    MetricsRecord,
)


def make_cost() -> CostReport:
    """A consistent inference cost report."""
    return CostReport(
        mode=CostMode.INFERENCE,
        attention_kind=AttentionKind.BUDGETED,
        n_examples=4,
        flops_projection=100,
        flops_attention=40,
        flops_budget_nets=10,
        flops_feedforward=200,
        flops_classifier=6,
        flops_total=356,
        memory_attention=64,
        memory_ratio=0.5,
        ratio_attention=0.5,
        s_mean=0.4,
        mean_k=2.0,
    )


def make_records() -> list[MetricsRecord]:
    return [
        MetricsRecord(
            kind=MetricsKind.STEP,
            step=10,
            epoch=1,
            loss=LossBreakdown.from_terms(task=1.0, budget=0.0, entropy=-0.01),
            acc_train=0.5,
            s_mean=0.4,
            mean_k=2.0,
        ),
        MetricsRecord(
            kind=MetricsKind.EPOCH,
            step=20,
            epoch=1,
            acc_val=0.75,
            cost=make_cost(),
        ),
    ]


def make_summary(name: str, accuracy: float, s_fixed: float | None = None) -> RunSummary:
    return RunSummary(
        name=name,
        s_fixed=s_fixed,
        accuracy=accuracy,
        s_mean=s_fixed,
        mean_k=2.0,
        mean_k_per_layer=[2.0, 1.5],
        flops_inference=356,
        ratio_attention=0.5,
        memory_ratio=0.5,
        carbon_proxy=0.0,
    )


def parse_csv(content: str) -> list[list[str]]:
    return list(csv.reader(io.StringIO(content)))


@pytest.fixture
def prepared(run_config):
    return prepare_data(run_config)


class TestMetricsStream:
    """Tests for the JSONL/CSV metrics writer."""

    def test_csv_columns(self):
        rows = parse_csv(export_metrics_csv(make_records()))
        assert rows[0] == METRICS_CSV_COLUMNS
        assert len(rows) == 3

    def test_missing_values_are_blank(self):
        rows = parse_csv(export_metrics_csv(make_records()))
        step, epoch = (dict(zip(rows[0], row, strict=True)) for row in rows[1:])
        assert float(step["loss_total"]) == pytest.approx(0.99)
        assert step["acc_val"] == ""
        assert step["flops_inference"] == ""
        assert epoch["loss_total"] == ""
        assert epoch["flops_inference"] == "356"
        assert epoch["ratio_attention"] == "0.5"

    def test_writer_round_trip(self, tmp_path):
        writer = MetricsWriter(tmp_path / "run")
        records = make_records()
        for record in records:
            writer.write(record)
        assert read_metrics(writer.jsonl_path) == records
        assert writer.csv_path.read_text() == export_metrics_csv(records)

    def test_writer_replaces_existing_stream(self, tmp_path):
        first = MetricsWriter(tmp_path)
        first.write(make_records()[0])
        second = MetricsWriter(tmp_path)
        assert read_metrics(second.jsonl_path) == []
        assert parse_csv(second.csv_path.read_text()) == [METRICS_CSV_COLUMNS]

    def test_identical_streams_are_identical_files(self, tmp_path):
        for name in ("a", "b"):
            writer = MetricsWriter(tmp_path / name)
            for record in make_records():
                writer.write(record)
        a = (tmp_path / "a" / "metrics.jsonl").read_bytes()
        assert a == (tmp_path / "b" / "metrics.jsonl").read_bytes()


class TestRunTables:
    """Tests for comparison and ablation tables."""

    def test_runs_csv(self):
        summaries = [make_summary("fixed_budget_s0.25", 0.6, 0.25), make_summary("standard", 0.8)]
        rows = parse_csv(export_runs_csv(summaries))
        assert rows[0] == RUN_COLUMNS
        first = dict(zip(rows[0], rows[1], strict=True))
        assert first["s_fixed"] == "0.25"
        assert first["mean_k_per_layer"] == "2 1.5"
        second = dict(zip(rows[0], rows[2], strict=True))
        assert second["s_fixed"] == ""
        assert second["accuracy"] == "0.8"

    def test_side_by_side(self):
        rows = parse_csv(
            export_side_by_side_csv(make_summary("learned", 0.9), make_summary("random", 0.7))
        )
        assert rows[0] == ["metric", "learned", "random"]
        assert rows[1] == ["accuracy", "0.9", "0.7"]
        assert [row[0] for row in rows[1:]] == [
            "accuracy",
            "s_mean",
            "mean_k",
            "flops_inference",
            "ratio_attention",
        ]

    def test_summary_from_evaluation(self, prepared):
        model = build_model(prepared.config.build_model_config(), seed=0)
        evaluation = evaluate(model, prepared.val)
        summary = RunSummary.from_evaluation("budgeted", evaluation)
        assert summary.accuracy == evaluation.accuracy
        assert summary.flops_inference == evaluation.cost.flops_total
        assert summary.mean_k == evaluation.cost.mean_k
        assert len(summary.mean_k_per_layer) == model.config.n_layers

    def test_cost_report_json(self):
        payload = json.loads(export_cost_report_json(make_cost()))
        assert payload["flops_total"] == 356
        assert payload["mode"] == "inference"
        assert CostReport.model_validate(payload) == make_cost()


class TestAnalysisTables:
    """Tests for gating tables and attention dumps."""

    def test_exports(self, prepared):
        model = build_model(prepared.config.build_model_config(), seed=0)
        result = analyze(model, prepared.val, dump_indices=[3])

        classes = parse_csv(export_class_table_csv(result.class_rows))
        assert classes[0] == ["layer", "label", "count", "s_mean", "s_std", "entropy_mean"]
        assert len(classes) == 1 + len(result.class_rows)

        tiers = parse_csv(export_tier_table_csv(result.tier_rows))
        assert tiers[0][:3] == ["layer", "tier", "count"]
        assert {row[1] for row in tiers[1:]} <= {"simple", "medium", "hard"}

        layers = parse_csv(export_layer_table_csv(result.layer_s_mean))
        assert layers[0] == ["layer", "s_mean"]
        assert [row[0] for row in layers[1:]] == ["0"]

        dump = json.loads(export_attention_json(result.dumps[0]))
        assert dump["example_index"] == 3
        assert dump["layers"][0]["heads"]
