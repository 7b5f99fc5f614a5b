"""Output generators for BudgetFormer runs."""

from budgetformer.generators.metrics import (
    METRICS_CSV,
    METRICS_CSV_COLUMNS,
    METRICS_JSONL,
    MetricsWriter,
    export_metrics_csv,
    read_metrics,
)
from budgetformer.generators.tables import (
    RunSummary,
    export_attention_json,
    export_class_table_csv,
    export_cost_report_json,
    export_layer_table_csv,
    export_runs_csv,
    export_side_by_side_csv,
    export_tier_table_csv,
)

__all__ = [
    "METRICS_CSV",
    "METRICS_CSV_COLUMNS",
    "METRICS_JSONL",
    "MetricsWriter",
    "RunSummary",
    "export_attention_json",
    "export_class_table_csv",
    "export_cost_report_json",
    "export_layer_table_csv",
    "export_metrics_csv",
    "export_runs_csv",
    "export_side_by_side_csv",
    "export_tier_table_csv",
    "read_metrics",
]
