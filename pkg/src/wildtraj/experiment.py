"""
Этапы полного эксперимента и обучение/оценка одной задачи один-против-всех.

Общие данные (засечки, сутки, признаки, манифест) лежат в `<out>/data_<resolution>`;
каждая задача пишет свой каталог `<species>_<arch>_<schema>_<resolution>`.
"""

import asyncio
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from .core.errors import LeakageError, SchemaError, SplitError, WildtrajError
from .core.features import SCHEMA_COLUMNS, FeatureSet, NormStats
from .core.ingest import group_tracks, ingest_files, write_fixes_csv, write_rejections
from .core.resample import resample_tracks, summarize_days
from .core.split import (
    SPLITS,
    SplitManifest,
    audit_leakage,
    make_manifest,
    read_manifest_csv,
    write_manifest_csv,
)
from .core.storage import read_feature_set, write_days_csv, write_feature_set, write_text
from .core.synth import load_archetypes, select_archetypes, synth_scenario, write_synth_csv
from .core.types import SLOTS_PER_DAY
from .evaluation.report import MetricsReport, evaluate_checkpoint, write_report
from .models.checkpoint import load_checkpoint, save_checkpoint
from .models.registry import create_model
from .training.trainer import FitResult, Trainer, TrainingData, write_history_csv
from .utils.config import ModelConfig, RunConfig, TrainConfig
from .utils.logging import init_logging, setup_logger
from .utils.pipeline import RunContext, Stage, StageChain, print_table

logger = setup_logger(__name__)

SYNTH_FILE = "synth_fixes.csv"
FIXES_FILE = "fixes.csv"
REJECTIONS_FILE = "rejections.txt"
DAYS_FILE = "days.csv"
MANIFEST_FILE = "manifest.csv"
AUDIT_FILE = "audit.txt"
CHECKPOINT_FILE = "model.trjm"
HISTORY_FILE = "history.csv"
NORM_FILE = "norm_stats.txt"

PathLike = Union[str, Path]


def features_file(schema: str) -> str:
    return f"features_{schema}.bin"


def data_dir(config: RunConfig) -> Path:
    return Path(config.out) / f"data_{config.resolution}"


def experiment_name(target: str, config: RunConfig) -> str:
    """Детерминированное имя каталога задачи"""
    species = re.sub(r"[^A-Za-z0-9.-]+", "_", target).strip("_") or "species"
    return f"{species}_{config.arch}_{config.schema_name}_{config.resolution}"


def model_config_for(config: RunConfig) -> ModelConfig:
    """Форма входа и архитектура берутся из эксперимента, остальное из model.*"""
    return config.model.model_copy(update={
        "arch": config.arch,
        "n_features": len(SCHEMA_COLUMNS[config.schema_name]),
        "seq_len": SLOTS_PER_DAY[config.resolution_seconds],
        "num_classes": 2,
        "seed": config.seed,
    })


def train_config_for(config: RunConfig) -> TrainConfig:
    return config.train.model_copy(update={"seed": config.seed})


def task_config(config: RunConfig, target: str) -> RunConfig:
    """Конфигурация, воспроизводящая ровно одну задачу (эхо в config.txt)"""
    return config.model_copy(update={"species": [target]})


@dataclass
class PreparedSplits:
    """Стандартизованные выборки одной задачи"""
    train: TrainingData
    val: TrainingData
    test: FeatureSet
    test_labels: np.ndarray
    norm_stats: Optional[NormStats]


def _training_data(features: FeatureSet, labels: np.ndarray) -> TrainingData:
    return TrainingData(features.x, features.obs_mask.astype(np.float32), labels)


def prepare_splits(features: FeatureSet, manifest: SplitManifest, target: str,
                   standardize: bool = True) -> PreparedSplits:
    """
    Делит сутки по манифесту; статистики стандартизации - только по train

    Raises:
        SplitError: Целевого вида нет в данных или обучающая выборка пуста
    """
    if target not in set(features.species.tolist()):
        raise SplitError(f"Target species {target!r} is absent from the feature set")
    keys = features.keys()
    indices = {split: manifest.indices(keys, split) for split in SPLITS}
    if indices["train"].size == 0:
        raise SplitError("Training split is empty")
    stats = features.fit_norm_stats(indices["train"]) if standardize else None
    prepared = features.standardized(stats)
    labels = prepared.binary_labels(target)
    return PreparedSplits(
        train=_training_data(prepared.subset(indices["train"]), labels[indices["train"]]),
        val=_training_data(prepared.subset(indices["val"]), labels[indices["val"]]),
        test=prepared.subset(indices["test"]),
        test_labels=labels[indices["test"]],
        norm_stats=stats,
    )


def train_target(config: RunConfig, features: FeatureSet, manifest: SplitManifest,
                 target: str, directory: PathLike) -> FitResult:
    """
    Обучает классификатор target-против-всех и сохраняет артефакты

    В каталог пишутся config.txt, model.trjm, history.csv и norm_stats.txt.

    Raises:
        SplitError: В train нет одного из классов
        TrainingDivergedError: Обучение разошлось
    """
    out = Path(directory)
    effective = task_config(config, target)
    effective.save(out)
    splits = prepare_splits(features, manifest, target, config.standardize)
    model = create_model(model_config_for(config))
    trainer = Trainer(train_config_for(config), record_timing=config.record_timing)
    result = trainer.fit(model, splits.train, splits.val)

    meta = {
        "target": target,
        "seed": str(config.seed),
        "fingerprint": effective.fingerprint(),
        "best_epoch": str(result.history.best_epoch),
        "stop_reason": result.history.stop_reason,
    }
    save_checkpoint(model, out / CHECKPOINT_FILE, norm_stats=splits.norm_stats, meta=meta)
    write_history_csv(result.history, out / HISTORY_FILE)
    if splits.norm_stats is not None:
        (out / NORM_FILE).write_text(splits.norm_stats.to_text(), encoding="utf-8")
    return result


def evaluate_target(checkpoint_path: PathLike, features: FeatureSet, manifest: SplitManifest,
                    target: str, directory: PathLike) -> MetricsReport:
    """
    Оценивает сохранённую модель на тестовой выборке манифеста

    Raises:
        SplitError: Тестовая выборка пуста
    """
    checkpoint = load_checkpoint(checkpoint_path)
    test = features.subset(manifest.indices(features.keys(), "test"))
    report = evaluate_checkpoint(checkpoint, test, test.binary_labels(target), target=target)
    write_report(report, directory)
    return report


def run_target(config: RunConfig, features: FeatureSet, manifest: SplitManifest,
               target: str, directory: PathLike) -> MetricsReport:
    """Полный цикл одной задачи: обучение, контрольная точка, оценка, отчёты"""
    out = Path(directory)
    write_manifest_csv(manifest, out / MANIFEST_FILE)
    train_target(config, features, manifest, target, out)
    return evaluate_target(out / CHECKPOINT_FILE, features, manifest, target, out)


@dataclass
class TaskSpec:
    """Задача воркера; данные передаются путями к файлам"""
    config: RunConfig
    target: str
    features_path: str
    manifest_path: str
    directory: str
    log_level: int


@dataclass
class TaskOutcome:
    target: str
    directory: str
    exit_code: int = 0
    error: str = ""
    balanced_acc: float = float("nan")
    auc: Optional[float] = None


def run_task(spec: TaskSpec) -> TaskOutcome:
    """Точка входа воркера пула; ошибки пайплайна возвращаются как код"""
    init_logging(spec.log_level)
    try:
        features = read_feature_set(spec.features_path)
        within = {s for s, study in spec.config.holdout.items() if study == "*"}
        manifest = read_manifest_csv(spec.manifest_path, spec.config.holdout, within)
        report = run_target(spec.config, features, manifest, spec.target, spec.directory)
    except WildtrajError as e:
        logger.error("Task %s failed: %s", spec.target, e)
        return TaskOutcome(spec.target, spec.directory, exit_code=e.exit_code, error=str(e))
    return TaskOutcome(spec.target, spec.directory, balanced_acc=report.balanced_acc,
                       auc=report.auc)


class IngestStage(Stage):
    """Засечки из входных CSV или из синтетического сценария"""

    async def run(self, ctx: RunContext) -> bool:
        config: RunConfig = ctx.config
        out = data_dir(config)
        inputs = list(config.inputs)
        if not inputs:
            if config.synth_config is None and not config.synth_species:
                raise SchemaError("No input CSVs and no synthetic scenario configured")
            archetypes = select_archetypes(load_archetypes(config.synth_config),
                                           config.synth_species)
            scenario = synth_scenario(
                archetypes, n_studies=config.synth_studies, n_animals=config.synth_animals,
                n_days=config.synth_days, resolution=config.resolution_seconds,
                seed=config.seed, workers=config.workers,
            )
            inputs = [str(write_synth_csv(scenario.records, out / SYNTH_FILE))]
            ctx.config = config = config.model_copy(
                update={"holdout": {**scenario.holdout, **config.holdout}})
        config.save(out)

        results = ingest_files(inputs, study_id=config.study_id, species=config.species_label,
                               sidecar=config.sidecar, tz_offset=config.tz_offset)
        records = [record for result in results for record in result.records]
        write_fixes_csv(records, out / FIXES_FILE)
        write_rejections(results, out / REJECTIONS_FILE)
        rejected = sum(result.rejected for result in results)
        if rejected:
            logger.warning("%d row(s) rejected, see %s", rejected, out / REJECTIONS_FILE)
        if not records:
            raise SchemaError("No valid fixes in the input")
        ctx.artifacts["records"] = records
        return True


class ResampleStage(Stage):
    """Треки -> номинальная сетка -> сутки"""

    async def run(self, ctx: RunContext) -> bool:
        config: RunConfig = ctx.config
        days, stats = resample_tracks(group_tracks(ctx.artifacts["records"]),
                                      config.resolution_seconds)
        write_days_csv(days, data_dir(config) / DAYS_FILE)
        logger.info("Resampled %d track(s): %d day(s) retained, %d dropped, %d slot(s) "
                    "interpolated", stats.tracks, stats.days_retained, stats.days_dropped,
                    stats.interpolated)
        summary = summarize_days(days)
        print_table(summary.to_dict("records"), list(summary.columns),
                    title=f"Retained days at {config.resolution}", quiet=ctx.quiet)
        ctx.artifacts["days"] = days
        if not days:
            logger.error("No day passed the coverage threshold")
        return bool(days)


class FeaturizeStage(Stage):
    async def run(self, ctx: RunContext) -> bool:
        config: RunConfig = ctx.config
        features = FeatureSet.from_days(ctx.artifacts["days"], config.schema_name)
        path = write_feature_set(features, data_dir(config) / features_file(config.schema_name))
        ctx.artifacts["features"] = features
        ctx.artifacts["features_path"] = path
        return True


class SplitStage(Stage):
    """Манифест и аудит утечек; при провале аудита обучение не запускается"""

    async def run(self, ctx: RunContext) -> bool:
        config: RunConfig = ctx.config
        out = data_dir(config)
        days = ctx.artifacts["days"]
        manifest = make_manifest(days, config.holdout, val_fraction=config.val_fraction,
                                 seed=config.seed,
                                 allow_within_study_test=config.allow_within_study_test,
                                 test_fraction=config.test_fraction)
        audit = audit_leakage(manifest, days)
        write_text(out / AUDIT_FILE, audit.to_text().splitlines())
        if not audit.passed:
            raise LeakageError(f"Leakage audit failed with {len(audit.violations)} "
                               f"violation(s), see {out / AUDIT_FILE}", report=audit)
        ctx.artifacts["manifest"] = manifest
        ctx.artifacts["manifest_path"] = write_manifest_csv(manifest, out / MANIFEST_FILE)
        return True


class TrainEvaluateStage(Stage):
    """Задачи один-против-всех по целевым видам; при workers > 1 - пул процессов"""

    async def run(self, ctx: RunContext) -> bool:
        config: RunConfig = ctx.config
        features: FeatureSet = ctx.artifacts["features"]
        targets = list(config.species) or sorted(set(features.species.tolist()))
        specs = [TaskSpec(
            config=config,
            target=target,
            features_path=str(ctx.artifacts["features_path"]),
            manifest_path=str(ctx.artifacts["manifest_path"]),
            directory=str(Path(config.out) / experiment_name(target, config)),
            log_level=ctx.log_level,
        ) for target in targets]

        if config.workers > 1 and len(specs) > 1:
            loop = asyncio.get_running_loop()
            with ProcessPoolExecutor(max_workers=min(config.workers, len(specs))) as pool:
                outcomes = await asyncio.gather(
                    *(loop.run_in_executor(pool, run_task, spec) for spec in specs))
        else:
            outcomes = []
            manifest = ctx.artifacts["manifest"]
            for spec in specs:
                report = run_target(spec.config, features, manifest, spec.target,
                                    spec.directory)
                outcomes.append(TaskOutcome(spec.target, spec.directory,
                                            balanced_acc=report.balanced_acc, auc=report.auc))

        ctx.artifacts["outcomes"] = outcomes
        failed = [o for o in outcomes if o.exit_code]
        if failed:
            error = WildtrajError(f"{len(failed)} task(s) failed: "
                                  + "; ".join(f"{o.target}: {o.error}" for o in failed))
            error.exit_code = failed[0].exit_code
            raise error
        return True


def build_pipeline(quiet: bool = False) -> StageChain:
    return (StageChain(quiet=quiet) >> IngestStage() >> ResampleStage() >> FeaturizeStage()
            >> SplitStage() >> TrainEvaluateStage())


def run_all(config: RunConfig, quiet: bool = False,
            log_level: int = logging.INFO) -> List[TaskOutcome]:
    """
    Полный эксперимент: ingest -> resample -> featurize -> split (+аудит) -> train/evaluate

    Returns:
        List[TaskOutcome]: По одной записи на целевой вид

    Raises:
        WildtrajError: Ошибка этапа (код возврата в exit_code)
    """
    ctx = RunContext(config=config, out_dir=Path(config.out), quiet=quiet, log_level=log_level)
    chain = build_pipeline(quiet=quiet)
    if not asyncio.run(chain.run(ctx)):
        if chain.error is not None:
            raise chain.error
        raise WildtrajError(f"Pipeline stopped at stage {chain.failed_stage}")
    return ctx.artifacts["outcomes"]


def outcome_rows(outcomes: List[TaskOutcome]) -> List[Dict[str, object]]:
    return [{
        "target": o.target,
        "directory": o.directory,
        "balanced_acc": round(o.balanced_acc, 4),
        "auc": "NA" if o.auc is None else round(o.auc, 4),
    } for o in outcomes]
