from .errors import (
    CorruptInputError,
    LeakageError,
    SchemaError,
    ShapeError,
    SplitError,
    TrainingDivergedError,
    WildtrajError,
)
from .types import AnimalTrack, DailySequence, FixRecord, GridTrack
from .ingest import ColumnMap, group_tracks, ingest_files, parse_fixes
from .resample import ResampleStats, reference_grid, resample_track, resample_tracks
from .features import FeatureSet, FeatureTensor, NormStats, assemble, build_features, featurize
from .split import AuditReport, SplitManifest, audit_leakage, make_manifest
from .synth import Archetype, generate, load_archetypes, synth_scenario

__all__ = [
    'AnimalTrack',
    'Archetype',
    'AuditReport',
    'ColumnMap',
    'CorruptInputError',
    'DailySequence',
    'FeatureSet',
    'FeatureTensor',
    'FixRecord',
    'GridTrack',
    'LeakageError',
    'NormStats',
    'ResampleStats',
    'SchemaError',
    'ShapeError',
    'SplitError',
    'SplitManifest',
    'TrainingDivergedError',
    'WildtrajError',
    'assemble',
    'audit_leakage',
    'build_features',
    'featurize',
    'generate',
    'group_tracks',
    'ingest_files',
    'load_archetypes',
    'make_manifest',
    'parse_fixes',
    'reference_grid',
    'resample_track',
    'resample_tracks',
    'synth_scenario',
]
