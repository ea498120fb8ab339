"""Командная строка: отдельные этапы пайплайна и полный прогон run-all"""

import argparse
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from . import __version__
from .core.errors import LeakageError, SchemaError, WildtrajError
from .core.features import FeatureSet
from .core.ingest import (
    group_tracks,
    ingest_files,
    read_fixes_csv,
    write_fixes_csv,
    write_rejections,
)
from .core.resample import ResampleStats, resample_track, summarize_days, write_grid_csv
from .core.split import audit_leakage, make_manifest, read_manifest_csv, write_manifest_csv
from .core.storage import (
    read_days_csv,
    read_feature_set,
    write_days_csv,
    write_feature_set,
    write_text,
)
from .core.synth import load_archetypes, select_archetypes, synth_scenario, write_synth_csv
from .evaluation.report import compare, print_comparison
from .experiment import (
    AUDIT_FILE,
    CHECKPOINT_FILE,
    DAYS_FILE,
    FIXES_FILE,
    MANIFEST_FILE,
    REJECTIONS_FILE,
    SYNTH_FILE,
    evaluate_target,
    experiment_name,
    features_file,
    outcome_rows,
    run_all,
    train_target,
)
from .utils.config import RunConfig, parse_mapping
from .utils.logging import init_logging, level_from_flags, setup_logger
from .utils.pipeline import print_table

logger = setup_logger(__name__)


def _common_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--resolution", choices=["1h", "30m"])
    parser.add_argument("--features", choices=["minimal", "augmented"])
    parser.add_argument("--arch", choices=["transformer", "lstm", "cnn1d", "tcn"])
    parser.add_argument("--species", action="append", metavar="NAME",
                        help="target species (repeatable; default: every species)")
    parser.add_argument("--holdout", action="append", metavar="SPECIES=STUDY",
                        help="held-out study per species (repeatable)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--no-standardize", dest="standardize", action="store_const",
                        const=False, default=None)
    parser.add_argument("--allow-within-study-test", dest="allow_within_study_test",
                        action="store_const", const=True, default=None)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--record-timing", dest="record_timing", action="store_const",
                        const=True, default=None)
    parser.add_argument("--set", dest="settings", action="append", metavar="KEY=VALUE",
                        help="any config key, e.g. train.max_epochs=5 (repeatable)")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    return parser


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="wildtraj", description="Species classification from GPS trajectories")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse telemetry CSVs into fixes.csv")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--sidecar", help="file -> study_id, species manifest")
    p.add_argument("--study-id", dest="study_id")
    p.add_argument("--species-label", dest="species_label")
    p.add_argument("--tz-offset", dest="tz_offset", help="+HH:MM or IANA zone for naive stamps")
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("resample", parents=[common], help="snap fixes to the grid, cut days")
    p.add_argument("--fixes", help=f"normalized fixes (default OUT/{FIXES_FILE})")
    p.add_argument("--grids", action="store_true", help="also write one grid CSV per animal")
    p.set_defaults(handler=cmd_resample)

    p = sub.add_parser("featurize", parents=[common], help="build the TRJF feature container")
    p.add_argument("--days", help=f"daily sequences (default OUT/{DAYS_FILE})")
    p.set_defaults(handler=cmd_featurize)

    p = sub.add_parser("split", parents=[common], help="build and audit the split manifest")
    p.add_argument("--days", help=f"daily sequences (default OUT/{DAYS_FILE})")
    p.set_defaults(handler=cmd_split)

    for name, handler, text in (("train", cmd_train, "train one-vs-rest classifiers"),
                                ("evaluate", cmd_evaluate, "score checkpoints on the test split")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--features-file", dest="features_file",
                       help="TRJF container (default OUT/features_<schema>.bin)")
        p.add_argument("--manifest", help=f"split manifest (default OUT/{MANIFEST_FILE})")
        if name == "evaluate":
            p.add_argument("--checkpoint", help="checkpoint (default: the experiment directory)")
        p.set_defaults(handler=handler)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic multi-study dataset")
    p.add_argument("--synth-config", dest="synth_config", help="archetype file")
    p.add_argument("--synth-species", dest="synth_species", action="append",
                   metavar="LABEL=ARCHETYPE")
    p.add_argument("--studies", dest="synth_studies", type=int)
    p.add_argument("--animals", dest="synth_animals", type=int)
    p.add_argument("--days", dest="synth_days", type=int)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("run-all", parents=[common], help="full pipeline for every target")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--sidecar")
    p.add_argument("--synth-species", dest="synth_species", action="append",
                   metavar="LABEL=ARCHETYPE")
    p.set_defaults(handler=cmd_run_all)

    p = sub.add_parser("compare", help="tabulate report.txt files of experiment directories")
    p.add_argument("directories", nargs="+")
    p.add_argument("--csv", help="also write the table as CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(handler=cmd_compare)
    return parser


OVERRIDE_KEYS = (
    "resolution", "features", "arch", "species", "holdout", "seed", "out", "standardize",
    "allow_within_study_test", "workers", "record_timing", "inputs", "sidecar", "study_id",
    "species_label", "tz_offset", "synth_config", "synth_species", "synth_studies",
    "synth_animals", "synth_days",
)


def load_config(args: argparse.Namespace) -> RunConfig:
    """Файл конфигурации, поверх него флаги и --set"""
    overrides: Dict[str, Any] = {}
    for key in OVERRIDE_KEYS:
        value = getattr(args, key, None)
        if value is None or value == []:
            continue
        overrides[key] = value
    overrides.update(parse_mapping(args.settings or []))
    return RunConfig.load(args.config, overrides)


def _out(config: RunConfig) -> Path:
    return Path(config.out)


def cmd_ingest(args: argparse.Namespace, config: RunConfig) -> int:
    if not config.inputs:
        raise SchemaError("ingest needs at least one input CSV (positional or inputs = ...)")
    out = _out(config)
    results = ingest_files(config.inputs, study_id=config.study_id,
                           species=config.species_label, sidecar=config.sidecar,
                           tz_offset=config.tz_offset)
    records = [record for result in results for record in result.records]
    write_fixes_csv(records, out / FIXES_FILE)
    write_rejections(results, out / REJECTIONS_FILE)
    config.save(out)
    logger.info("Wrote %d fixes to %s", len(records), out / FIXES_FILE)
    return 0


def cmd_resample(args: argparse.Namespace, config: RunConfig) -> int:
    out = _out(config)
    tracks = group_tracks(read_fixes_csv(args.fixes or out / FIXES_FILE))
    stats = ResampleStats()
    days = []
    for track in tracks:
        grid, track_days = resample_track(track, config.resolution_seconds, stats)
        days.extend(track_days)
        if args.grids and grid is not None:
            write_grid_csv(grid, out / "grids" / f"{track.animal_id}.csv")
    write_days_csv(days, out / DAYS_FILE)
    config.save(out)
    logger.info("%d day(s) retained, %d dropped, %d slot(s) interpolated",
                stats.days_retained, stats.days_dropped, stats.interpolated)
    summary = summarize_days(days)
    print_table(summary.to_dict("records"), list(summary.columns),
                title=f"Retained days at {config.resolution}", quiet=args.quiet)
    return 0


def cmd_featurize(args: argparse.Namespace, config: RunConfig) -> int:
    out = _out(config)
    days = read_days_csv(args.days or out / DAYS_FILE)
    features = FeatureSet.from_days(days, config.schema_name)
    path = write_feature_set(features, out / features_file(config.schema_name))
    config.save(out)
    logger.info("Wrote %d %s tensors to %s", len(features), config.schema_name, path)
    return 0


def cmd_split(args: argparse.Namespace, config: RunConfig) -> int:
    out = _out(config)
    days = read_days_csv(args.days or out / DAYS_FILE)
    manifest = make_manifest(days, config.holdout, val_fraction=config.val_fraction,
                             seed=config.seed,
                             allow_within_study_test=config.allow_within_study_test,
                             test_fraction=config.test_fraction)
    audit = audit_leakage(manifest, days)
    write_text(out / AUDIT_FILE, audit.to_text().splitlines())
    config.save(out)
    if not audit.passed:
        raise LeakageError(f"Leakage audit failed, see {out / AUDIT_FILE}", report=audit)
    write_manifest_csv(manifest, out / MANIFEST_FILE)
    return 0


def _load_task_inputs(args: argparse.Namespace, config: RunConfig):
    out = _out(config)
    features = read_feature_set(args.features_file or out / features_file(config.schema_name))
    within = {species for species, study in config.holdout.items() if study == "*"}
    manifest = read_manifest_csv(args.manifest or out / MANIFEST_FILE, config.holdout, within)
    targets = list(config.species) or sorted(set(features.species.tolist()))
    return features, manifest, targets


def cmd_train(args: argparse.Namespace, config: RunConfig) -> int:
    features, manifest, targets = _load_task_inputs(args, config)
    for target in targets:
        directory = _out(config) / experiment_name(target, config)
        result = train_target(config, features, manifest, target, directory)
        logger.info("%s: best epoch %d, val_loss=%.4f -> %s", target,
                    result.history.best_epoch, result.history.best_val_loss, directory)
    return 0


def cmd_evaluate(args: argparse.Namespace, config: RunConfig) -> int:
    features, manifest, targets = _load_task_inputs(args, config)
    if args.checkpoint and len(targets) != 1:
        raise WildtrajError("--checkpoint needs exactly one --species")
    for target in targets:
        directory = _out(config) / experiment_name(target, config)
        checkpoint = Path(args.checkpoint) if args.checkpoint else directory / CHECKPOINT_FILE
        evaluate_target(checkpoint, features, manifest, target, directory)
    return 0


def cmd_synth(args: argparse.Namespace, config: RunConfig) -> int:
    out = _out(config)
    archetypes = select_archetypes(load_archetypes(config.synth_config), config.synth_species)
    scenario = synth_scenario(archetypes, n_studies=config.synth_studies,
                              n_animals=config.synth_animals, n_days=config.synth_days,
                              resolution=config.resolution_seconds, seed=config.seed,
                              workers=config.workers)
    path = write_synth_csv(scenario.records, out / SYNTH_FILE)
    lines = [f"holdout = {species}={study}" for species, study in sorted(scenario.holdout.items())]
    write_text(out / "holdout.txt", lines)
    config.save(out)
    logger.info("Wrote %d synthetic fixes to %s", len(scenario.records), path)
    return 0


def cmd_run_all(args: argparse.Namespace, config: RunConfig) -> int:
    outcomes = run_all(config, quiet=args.quiet,
                       log_level=level_from_flags(args.verbose, args.quiet))
    print_table(outcome_rows(outcomes), ["target", "directory", "balanced_acc", "auc"],
                title="Experiments", quiet=args.quiet)
    return 0


def cmd_compare(args: argparse.Namespace, config: Optional[RunConfig]) -> int:
    frame = compare(args.directories)
    print_comparison(frame, quiet=args.quiet)
    if args.csv:
        frame.to_csv(args.csv, index=False)
    return 0


Handler = Callable[[argparse.Namespace, Optional[RunConfig]], int]


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Точка входа CLI

    Returns:
        int: 0 при успехе; 2 - ошибка схемы, 3 - провал аудита, 4 - расхождение обучения
    """
    args = build_parser().parse_args(argv)
    init_logging(level_from_flags(args.verbose, args.quiet))
    handler: Handler = args.handler
    try:
        config = None if args.command == "compare" else load_config(args)
        return handler(args, config)
    except WildtrajError as e:
        logger.error("%s", e)
        return e.exit_code
    except Exception:
        logger.exception("Unexpected failure in %s", args.command)
        return 1


def run(argv: Optional[List[str]] = None) -> None:
    sys.exit(main(argv))
