"""Run orchestration: training, evaluation, ablations, analysis and comparisons.

Each function owns one run directory layout::

    <run>/resolved_config.yaml
    <run>/metrics.jsonl, metrics.csv
    <run>/cost_report.json
    <run>/checkpoints/{best,final}.bin
    <run>/analysis/*.csv, <run>/attention/*.json
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from budgetformer.data import Vocabulary, load_jsonl, prepare_data, steps_per_epoch
from budgetformer.engine.analysis import AnalysisResult, analyze
from budgetformer.engine.checkpoint import load_checkpoint
from budgetformer.engine.encoder import EncoderClassifier, build_model
from budgetformer.engine.trainer import (
    CHECKPOINT_DIR,
    EvaluationResult,
    GatingPolicy,
    TrainingResult,
    evaluate,
    train,
)
from budgetformer.errors import ContractError, ParameterError
from budgetformer.generators import (
    MetricsWriter,
    RunSummary,
    export_attention_json,
    export_class_table_csv,
    export_cost_report_json,
    export_layer_table_csv,
    export_runs_csv,
    export_side_by_side_csv,
    export_tier_table_csv,
)
from budgetformer.models import (
    RESOLVED_CONFIG_NAME,
    AblationMode,
    AttentionKind,
    ClassifiedExample,
    RunConfig,
)

logger = logging.getLogger(__name__)

COST_REPORT = "cost_report.json"
COMPARISON_CSV = "comparison.csv"
ANALYSIS_DIR = "analysis"
ATTENTION_DIR = "attention"

# Fixed-budget grid of the ablation study
DEFAULT_ABLATION_GRID = (0.1, 0.25, 0.5, 0.75, 1.0)


@dataclass
class RunResult:
    run_dir: Path
    config: RunConfig
    training: TrainingResult
    evaluation: EvaluationResult


def run_training(cfg: RunConfig, run_dir: Path | None = None) -> RunResult:
    """Prepare data, train, then evaluate the best checkpoint on the validation set."""
    run_dir = run_dir or cfg.output_dir
    run_dir.mkdir(parents=True, exist_ok=True)
    data = prepare_data(cfg, run_dir)
    resolved = data.config.with_overrides({"output_dir": run_dir})
    resolved.to_yaml(run_dir / RESOLVED_CONFIG_NAME)
    logger.info("Run directory: %s", run_dir)

    model = build_model(resolved.build_model_config(), resolved.seed)
    total_steps = resolved.epochs * steps_per_epoch(len(data.train), resolved.batch_size)
    train_cfg = resolved.build_train_config(total_steps)
    policy = GatingPolicy.from_config(train_cfg)
    writer = MetricsWriter(run_dir)
    training = train(
        model,
        data.train,
        data.val,
        train_cfg,
        output_dir=run_dir,
        sink=writer.write,
        reference=policy.reference,
        grams_per_flop=resolved.grams_per_flop,
    )
    best = model
    if training.best_checkpoint is not None:
        best = load_checkpoint(training.best_checkpoint, model.config)
    evaluation = evaluate(
        best, data.val, policy, seed=resolved.seed, grams_per_flop=resolved.grams_per_flop
    )
    (run_dir / COST_REPORT).write_text(export_cost_report_json(evaluation.cost), encoding="utf-8")
    logger.info(
        "Best validation accuracy %.4f at epoch %d", training.best_accuracy, training.best_epoch
    )
    return RunResult(run_dir, resolved, training, evaluation)


def default_config_for(checkpoint: Path) -> Path | None:
    """The resolved config of the run a checkpoint was saved in, if present."""
    candidate = checkpoint.parent.parent / RESOLVED_CONFIG_NAME
    return candidate if candidate.exists() else None


def _load_model(checkpoint: Path, cfg: RunConfig | None) -> EncoderClassifier:
    expected = None
    if cfg is not None and cfg.vocab_size is not None and cfg.n_classes is not None:
        expected = cfg.build_model_config()
    return load_checkpoint(checkpoint, expected)


def load_eval_data(
    model: EncoderClassifier, cfg: RunConfig | None, data_path: Path | None
) -> list[ClassifiedExample]:
    """Examples from a JSONL file (needs the run's vocabulary) or the run's validation set."""
    if data_path is not None:
        if cfg is None or cfg.vocab_path is None:
            raise ContractError("evaluating a JSONL file needs a config with vocab_path")
        vocab = Vocabulary.load(cfg.vocab_path)
        return load_jsonl(data_path, vocab, model.config.max_seq_len, model.config.n_classes)
    if cfg is None:
        raise ContractError("pass --config or --data to choose the evaluation examples")
    return prepare_data(cfg).val


def _policy(cfg: RunConfig | None) -> GatingPolicy | None:
    if cfg is None:
        return None
    return GatingPolicy.from_config(cfg.build_train_config(total_steps=1))


def run_evaluation(
    checkpoint: Path,
    cfg: RunConfig | None = None,
    data_path: Path | None = None,
    force_k: int | None = None,
    output: Path | None = None,
) -> tuple[EvaluationResult, Path]:
    """Evaluate a checkpoint and write its cost report JSON."""
    model = _load_model(checkpoint, cfg)
    examples = load_eval_data(model, cfg, data_path)
    seed = cfg.seed if cfg is not None else 0
    grams = cfg.grams_per_flop if cfg is not None else 0.0
    evaluation = evaluate(
        model, examples, _policy(cfg), force_k=force_k, seed=seed, grams_per_flop=grams
    )
    output = output or checkpoint.parent / COST_REPORT
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(export_cost_report_json(evaluation.cost), encoding="utf-8")
    return evaluation, output


def _fixed_budget_run(cfg: RunConfig, run_dir: Path, s_fixed: float) -> RunSummary:
    result = run_training(cfg, run_dir)
    return RunSummary.from_evaluation(run_dir.name, result.evaluation, s_fixed=s_fixed)


def run_ablation(
    cfg: RunConfig,
    mode: AblationMode,
    grid: Sequence[float] = DEFAULT_ABLATION_GRID,
    parallel: bool = False,
) -> Path:
    """Run an ablation study under ``cfg.output_dir`` and write ``comparison.csv``.

    ``fixed_budget`` trains one run per grid value of s. ``random_gating``
    trains a learned-gating run, then a random-gating run whose budgets come
    from the learned run's best checkpoint; the grid is not used.
    """
    root = cfg.output_dir
    root.mkdir(parents=True, exist_ok=True)
    if mode == AblationMode.FIXED_BUDGET:
        if not grid:
            raise ParameterError("the fixed-budget grid is empty")
        jobs = []
        for s in grid:
            run_dir = root / f"fixed_budget_s{s:g}"
            run_cfg = cfg.with_overrides(
                {"ablation": AblationMode.FIXED_BUDGET, "s_fixed": s, "output_dir": run_dir}
            )
            jobs.append((run_cfg, run_dir, float(s)))
        if parallel and len(jobs) > 1:
            with ProcessPoolExecutor() as pool:
                futures = [pool.submit(_fixed_budget_run, *job) for job in jobs]
                summaries = [future.result() for future in futures]
        else:
            summaries = [_fixed_budget_run(*job) for job in jobs]
        content = export_runs_csv(summaries)
    elif mode == AblationMode.RANDOM_GATING:
        learned_dir = root / "learned"
        learned_cfg = cfg.with_overrides(
            {"ablation": AblationMode.NONE, "s_fixed": None, "reference_checkpoint": None}
        )
        learned = run_training(learned_cfg, learned_dir)
        reference = learned.training.best_checkpoint or learned.training.final_checkpoint
        random_dir = root / "random_gating"
        random_cfg = cfg.with_overrides(
            {"ablation": AblationMode.RANDOM_GATING, "reference_checkpoint": reference}
        )
        randomized = run_training(random_cfg, random_dir)
        content = export_side_by_side_csv(
            RunSummary.from_evaluation("learned_gating", learned.evaluation),
            RunSummary.from_evaluation("random_gating", randomized.evaluation),
        )
    else:
        raise ParameterError(f"ablation mode must be fixed_budget or random_gating, got {mode}")

    path = root / COMPARISON_CSV
    path.write_text(content, encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def run_comparison(cfg: RunConfig) -> Path:
    """Train standard and budgeted models on the same data and seed; write ``comparison.csv``."""
    root = cfg.output_dir
    root.mkdir(parents=True, exist_ok=True)
    summaries = []
    for kind in (AttentionKind.STANDARD, AttentionKind.BUDGETED):
        run_dir = root / kind.value
        run_cfg = cfg.with_overrides({"attention_kind": kind, "ablation": AblationMode.NONE})
        result = run_training(run_cfg, run_dir)
        summaries.append(RunSummary.from_evaluation(kind.value, result.evaluation))
    path = root / COMPARISON_CSV
    path.write_text(export_runs_csv(summaries), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def run_analysis(
    checkpoint: Path,
    cfg: RunConfig | None = None,
    data_path: Path | None = None,
    example_indices: Sequence[int] = (),
    dump_attention: bool = False,
    output_dir: Path | None = None,
) -> tuple[AnalysisResult, list[Path]]:
    """Write gating tables under ``analysis/`` and attention dumps under ``attention/``."""
    model = _load_model(checkpoint, cfg)
    examples = load_eval_data(model, cfg, data_path)
    indices = list(example_indices) if dump_attention else []
    seed = cfg.seed if cfg is not None else 0
    result = analyze(model, examples, _policy(cfg), dump_indices=indices, seed=seed)

    root = output_dir or checkpoint.parent.parent
    if checkpoint.parent.name != CHECKPOINT_DIR and output_dir is None:
        root = checkpoint.parent
    tables = root / ANALYSIS_DIR
    tables.mkdir(parents=True, exist_ok=True)
    written = [
        tables / "class_gating.csv",
        tables / "tier_gating.csv",
        tables / "layer_gating.csv",
    ]
    written[0].write_text(export_class_table_csv(result.class_rows), encoding="utf-8")
    written[1].write_text(export_tier_table_csv(result.tier_rows), encoding="utf-8")
    written[2].write_text(export_layer_table_csv(result.layer_s_mean), encoding="utf-8")
    if result.dumps:
        attention_dir = root / ATTENTION_DIR
        attention_dir.mkdir(parents=True, exist_ok=True)
        for dump in result.dumps:
            path = attention_dir / f"example_{dump.example_index}.json"
            path.write_text(export_attention_json(dump), encoding="utf-8")
            written.append(path)
    return result, written
