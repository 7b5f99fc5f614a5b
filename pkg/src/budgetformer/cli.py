"""BudgetFormer CLI - Typer-based command line interface."""

import json
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated, Any

import typer
import yaml
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from budgetformer.errors import BudgetFormerError, DivergenceError, ParameterError
from budgetformer.experiments import (
    DEFAULT_ABLATION_GRID,
    default_config_for,
    run_ablation,
    run_analysis,
    run_comparison,
    run_evaluation,
    run_training,
)
from budgetformer.log import configure_logging
from budgetformer.models import AblationMode, MetricsRecord, RunConfig

app = typer.Typer(
    name="budgetformer",
    help="Transformer classifiers with input-adaptive attention head budgets",
    no_args_is_help=True,
)

console = Console()


@app.callback()
def main(
    log_level: Annotated[
        str | None,
        typer.Option("--log-level", help="Log level (default: $BUDGETFORMER_LOG_LEVEL or INFO)"),
    ] = None,
) -> None:
    """Train, evaluate and analyze budgeted-attention classifiers."""
    configure_logging(log_level)


@contextmanager
def _errors_exit() -> Iterator[None]:
    """Turn library, validation and I/O failures into a red message and exit status 1."""
    try:
        yield
    except ValidationError as e:
        console.print("[red]Error:[/red] invalid configuration")
        for error in e.errors():
            location = ".".join(str(part) for part in error["loc"]) or "config"
            console.print(f"  {location}: {error['msg']}")
        raise typer.Exit(1) from e
    except DivergenceError as e:
        console.print(f"[red]Error:[/red] {e}")
        if e.checkpoint is not None:
            console.print(f"  Last good checkpoint: {e.checkpoint}")
        raise typer.Exit(1) from e
    except (BudgetFormerError, OSError) as e:
        console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(1) from e


def _parse_overrides(assignments: list[str] | None) -> dict[str, Any]:
    overrides: dict[str, Any] = {}
    for assignment in assignments or []:
        key, sep, raw = assignment.partition("=")
        if not sep or not key.strip():
            raise ParameterError(f"--set expects key=value, got {assignment!r}")
        overrides[key.strip()] = yaml.safe_load(raw)
    return overrides


def _parse_grid(grid: str) -> list[float]:
    try:
        return [float(part) for part in grid.split(",") if part.strip()]
    except ValueError as e:
        raise ParameterError(f"--grid expects comma-separated numbers, got {grid!r}") from e


def _load_config(path: Path) -> RunConfig:
    if not path.exists():
        raise FileNotFoundError(f"Configuration file not found: {path}")
    return RunConfig.from_yaml(path)


def _fmt(value: float | None, spec: str = ".4f") -> str:
    return "-" if value is None else format(value, spec)


def _summary_table(title: str, rows: list[tuple[str, str]]) -> Table:
    table = Table(title=title)
    table.add_column("Metric", style="bold")
    table.add_column("Value", justify="right")
    for name, value in rows:
        table.add_row(name, value)
    return table


def _record_rows(accuracy: float, record: MetricsRecord) -> list[tuple[str, str]]:
    cost = record.cost
    rows = [
        ("Accuracy", _fmt(accuracy)),
        ("s_mean", _fmt(record.s_mean)),
        ("Mean k", _fmt(record.mean_k, ".3f")),
    ]
    if cost is not None:
        rows += [
            ("FLOPs total", f"{cost.flops_total:,}"),
            ("Attention ratio", _fmt(cost.ratio_attention)),
            ("Memory ratio", _fmt(cost.memory_ratio)),
            ("Carbon proxy (g)", _fmt(cost.carbon_proxy, ".6g")),
        ]
    return rows


@app.command()
def init(
    output: Annotated[Path, typer.Option("--output", "-o", help="Output file path")] = Path(
        "budgetformer.yaml"
    ),
    force: Annotated[bool, typer.Option("--force", "-f", help="Overwrite existing file")] = False,
) -> None:
    """Write a default run configuration."""
    if output.exists() and not force:
        console.print(f"[red]Error:[/red] File {output} already exists. Use --force to overwrite.")
        raise typer.Exit(1)
    with _errors_exit():
        RunConfig().to_yaml(output)
    console.print(f"[green]Created[/green] {output}")
    console.print("\nNext steps:")
    console.print("  1. Point train_path/val_path at JSONL data or keep the synthetic task")
    console.print("  2. Run 'budgetformer train' to train a model")
    console.print("  3. Run 'budgetformer eval <checkpoint>' to report accuracy and cost")


@app.command()
def train(
    config: Annotated[Path, typer.Argument(help="Path to run configuration")] = Path(
        "budgetformer.yaml"
    ),
    seed: Annotated[int | None, typer.Option("--seed", help="Override the seed")] = None,
    epochs: Annotated[int | None, typer.Option("--epochs", help="Override epochs")] = None,
    learning_rate: Annotated[
        float | None, typer.Option("--learning-rate", "--lr", help="Override learning rate")
    ] = None,
    output_dir: Annotated[
        Path | None, typer.Option("--output-dir", "-o", help="Override the run directory")
    ] = None,
    set_: Annotated[
        list[str] | None,
        typer.Option("--set", help="Override any config field, e.g. --set d_model=32"),
    ] = None,
) -> None:
    """Train a model and write metrics, checkpoints and the resolved config."""
    with _errors_exit():
        cfg = _load_config(config)
        overrides = _parse_overrides(set_)
        flags = {
            "seed": seed,
            "epochs": epochs,
            "learning_rate": learning_rate,
            "output_dir": output_dir,
        }
        overrides.update({key: value for key, value in flags.items() if value is not None})
        if overrides:
            cfg = cfg.with_overrides(overrides)
        result = run_training(cfg)

    rows = [
        ("Best epoch", str(result.training.best_epoch)),
        ("Steps", str(result.training.total_steps)),
        *_record_rows(result.evaluation.accuracy, result.evaluation.record),
    ]
    console.print(_summary_table("Training Summary", rows))
    console.print(f"[green]Run written to[/green] {result.run_dir}")


@app.command("eval")
def evaluate_command(
    checkpoint: Annotated[Path, typer.Argument(help="Checkpoint file (.bin)")],
    config: Annotated[
        Path | None,
        typer.Option("--config", "-c", help="Run config (default: the run's resolved config)"),
    ] = None,
    data: Annotated[Path | None, typer.Option("--data", "-d", help="JSONL file to score")] = None,
    force_k: Annotated[
        int | None, typer.Option("--force-k", help="Activate exactly k heads per layer")
    ] = None,
    output: Annotated[
        Path | None, typer.Option("--output", "-o", help="Cost report JSON path")
    ] = None,
    json_output: Annotated[bool, typer.Option("--json", help="Output as JSON")] = False,
) -> None:
    """Evaluate a checkpoint: accuracy, budget statistics and inference cost."""
    with _errors_exit():
        config = config or default_config_for(checkpoint)
        cfg = _load_config(config) if config is not None else None
        evaluation, report_path = run_evaluation(checkpoint, cfg, data, force_k, output)

    if json_output:
        print(json.dumps(evaluation.record.model_dump(mode="json"), indent=2))
        return
    rows = _record_rows(evaluation.accuracy, evaluation.record)
    console.print(_summary_table("Evaluation", rows))
    console.print(f"[green]Cost report[/green] {report_path}")


@app.command()
def ablate(
    config: Annotated[Path, typer.Argument(help="Path to run configuration")] = Path(
        "budgetformer.yaml"
    ),
    mode: Annotated[
        AblationMode, typer.Option("--mode", "-m", help="fixed_budget or random_gating")
    ] = AblationMode.FIXED_BUDGET,
    grid: Annotated[
        str, typer.Option("--grid", "-g", help="Comma-separated fixed budgets s")
    ] = ",".join(f"{s:g}" for s in DEFAULT_ABLATION_GRID),
    parallel: Annotated[
        bool, typer.Option("--parallel", help="Run grid points in worker processes")
    ] = False,
    output_dir: Annotated[
        Path | None, typer.Option("--output-dir", "-o", help="Ablation root directory")
    ] = None,
) -> None:
    """Run the fixed-budget or random-gating ablation and write comparison.csv."""
    with _errors_exit():
        cfg = _load_config(config)
        if output_dir is not None:
            cfg = cfg.with_overrides({"output_dir": output_dir})
        path = run_ablation(cfg, mode, _parse_grid(grid), parallel=parallel)
    console.print(f"[green]Generated[/green] {path}")


@app.command()
def analyze(
    checkpoint: Annotated[Path, typer.Argument(help="Checkpoint file (.bin)")],
    config: Annotated[
        Path | None,
        typer.Option("--config", "-c", help="Run config (default: the run's resolved config)"),
    ] = None,
    data: Annotated[Path | None, typer.Option("--data", "-d", help="JSONL file to analyze")] = None,
    example_index: Annotated[
        list[int] | None,
        typer.Option("--example-index", "-e", help="Example to dump attention for (repeatable)"),
    ] = None,
    dump_attention: Annotated[
        bool, typer.Option("--dump-attention", help="Write attention maps as JSON")
    ] = False,
    output_dir: Annotated[
        Path | None, typer.Option("--output-dir", "-o", help="Directory for analysis outputs")
    ] = None,
) -> None:
    """Export per-class and per-tier gating tables and optional attention maps."""
    with _errors_exit():
        config = config or default_config_for(checkpoint)
        cfg = _load_config(config) if config is not None else None
        _, written = run_analysis(
            checkpoint, cfg, data, example_index or [], dump_attention, output_dir
        )
    for path in written:
        console.print(f"[green]Generated[/green] {path}")


@app.command()
def compare(
    config: Annotated[Path, typer.Argument(help="Path to run configuration")] = Path(
        "budgetformer.yaml"
    ),
    output_dir: Annotated[
        Path | None, typer.Option("--output-dir", "-o", help="Comparison root directory")
    ] = None,
) -> None:
    """Train standard and budgeted models on identical data and compare them."""
    with _errors_exit():
        cfg = _load_config(config)
        if output_dir is not None:
            cfg = cfg.with_overrides({"output_dir": output_dir})
        path = run_comparison(cfg)
    console.print(f"[green]Generated[/green] {path}")


@app.command()
def schema() -> None:
    """Export the JSON Schema of the run configuration."""
    print(json.dumps(RunConfig.model_json_schema(), indent=2))


if __name__ == "__main__":
    app()
