"""Feeder-level EV charging detection from minute-interval load data.

The package covers the full pipeline: synthetic labeled feeder corpora,
sliding-window feature extraction (batch and streaming), random forest
and gradient-boosted tree classifiers, and a feeder-split evaluation
harness. The ``evdetect`` command line exposes the same pipeline as
subcommands.
"""

from .series import (
    ChargingLabelSeries,
    FeederRecordSet,
    HouseholdRecordSet,
    LoadSeries,
    read_feeder_csv,
    read_household_csv,
    write_feeder_csv,
    write_household_csv,
)
from .windows import (
    WindowKind,
    WindowSpec,
    WindowStats,
    compute_window_stats,
    count_peaks,
    window_bounds,
)
from .features import (
    FeatureMatrix,
    FeatureMode,
    OfflineFeatureConfig,
    OnlineFeatureConfig,
    extract_offline_features,
    extract_online_features,
    featurize_series,
    read_feature_csv,
    write_feature_csv,
)
from .streaming import OnlineFeatureExtractor
from .synth import (
    FeederSynthConfig,
    HouseholdProfileParams,
    aggregate_feeder,
    generate_benchmark,
    generate_household,
)
from .trees import (
    GradientBoostedParams,
    ModelKind,
    RandomForestParams,
    TreeEnsembleModel,
    classify,
    deserialize_model,
    predict_proba,
    serialize_model,
    train_gbdt,
    train_random_forest,
)
from .metrics import ConfusionCounts, MetricsReport, confusion, f1_score, metrics
from .evaluate import (
    SplitAssignment,
    run_experiment,
    split_by_feeder,
    window_length_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ChargingLabelSeries",
    "ConfusionCounts",
    "FeatureMatrix",
    "FeatureMode",
    "FeederRecordSet",
    "FeederSynthConfig",
    "GradientBoostedParams",
    "HouseholdProfileParams",
    "HouseholdRecordSet",
    "LoadSeries",
    "MetricsReport",
    "ModelKind",
    "OfflineFeatureConfig",
    "OnlineFeatureConfig",
    "OnlineFeatureExtractor",
    "RandomForestParams",
    "SplitAssignment",
    "TreeEnsembleModel",
    "WindowKind",
    "WindowSpec",
    "WindowStats",
    "aggregate_feeder",
    "classify",
    "compute_window_stats",
    "confusion",
    "count_peaks",
    "deserialize_model",
    "extract_offline_features",
    "extract_online_features",
    "f1_score",
    "featurize_series",
    "generate_benchmark",
    "generate_household",
    "metrics",
    "predict_proba",
    "read_feature_csv",
    "read_feeder_csv",
    "read_household_csv",
    "run_experiment",
    "serialize_model",
    "split_by_feeder",
    "train_gbdt",
    "train_random_forest",
    "window_bounds",
    "window_length_sweep",
    "write_feature_csv",
    "write_feeder_csv",
    "write_household_csv",
]
