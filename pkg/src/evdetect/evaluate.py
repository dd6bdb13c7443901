"""Feeder-level experiment harness: splitting, training, evaluation, sweeps.

Feeders (not time steps) are partitioned into train/validation/test so
that evaluation always measures generalization to unseen feeders. A
single experiment seed deterministically derives the split shuffle and
the model seed, so rerunning an experiment reproduces its outputs byte
for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
import json
import math
from pathlib import Path

import numpy as np

from .features import (
    FeatureMatrix,
    FeatureMode,
    OfflineFeatureConfig,
    OnlineFeatureConfig,
    featurize_series,
)
from .metrics import ConfusionCounts, MetricsReport, confusion, metrics
from .seeding import mix_seed
from .series import FeederRecordSet
from .trees import (
    GradientBoostedParams,
    ModelKind,
    RandomForestParams,
    TreeEnsembleModel,
    classify,
    train_gbdt,
    train_random_forest,
)

DEFAULT_SPLIT_RATIOS = (0.75, 0.15, 0.10)


class InsufficientFeedersError(ValueError):
    pass


@dataclass(frozen=True)
class SplitAssignment:
    train: tuple
    validation: tuple
    test: tuple

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "validation", tuple(self.validation))
        object.__setattr__(self, "test", tuple(self.test))
        groups = (self.train, self.validation, self.test)
        if any(len(g) == 0 for g in groups):
            raise InsufficientFeedersError("every split part must be non-empty")
        all_ids = self.train + self.validation + self.test
        if len(set(all_ids)) != len(all_ids):
            raise ValueError("split parts must be disjoint")


def split_by_feeder(feeder_ids, ratios=DEFAULT_SPLIT_RATIOS,
                    seed: int = 0) -> SplitAssignment:
    """Shuffle feeders deterministically and slice by the given ratios.

    Train takes floor(r_train * F) feeders, validation floor(r_val * F),
    and test the remainder, so test is never empty.
    """
    ids = list(feeder_ids)
    if len(set(ids)) != len(ids):
        raise ValueError("feeder ids must be unique")
    r_train, r_val, r_test = ratios
    if min(r_train, r_val, r_test) <= 0 or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must be positive and sum to 1")
    rng = np.random.Generator(np.random.PCG64(mix_seed(seed)))
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n_train = math.floor(r_train * len(ids))
    n_val = math.floor(r_val * len(ids))
    if n_train == 0 or n_val == 0 or n_train + n_val >= len(ids):
        raise InsufficientFeedersError(
            f"{len(ids)} feeders cannot fill a {ratios} split"
        )
    return SplitAssignment(
        train=shuffled[:n_train],
        validation=shuffled[n_train:n_train + n_val],
        test=shuffled[n_train + n_val:],
    )


def feature_config_for(mode: FeatureMode, window_length: int,
                       peak_threshold: float = 1.0):
    if mode is FeatureMode.OFFLINE:
        return OfflineFeatureConfig(window_length=window_length,
                                    peak_threshold=peak_threshold)
    return OnlineFeatureConfig.for_length(window_length, peak_threshold)


def default_train_params(model_kind: ModelKind, seed: int):
    if model_kind is ModelKind.RANDOM_FOREST:
        return RandomForestParams(seed=seed)
    return GradientBoostedParams(seed=seed)


def _featurize_group(feeders, ids, mode, config, cache):
    by_id = {f.feeder_id: f for f in feeders}
    matrices = []
    label_arrays = []
    for fid in ids:
        feeder = by_id[fid]
        key = (fid, mode.value, config)
        matrix = cache.get(key) if cache is not None else None
        if matrix is None:
            matrix = featurize_series(feeder.load, mode, config)
            if cache is not None:
                cache[key] = matrix
        matrices.append(matrix)
        label_arrays.append(feeder.labels.labels)
    stacked = np.vstack([m.values for m in matrices])
    return (FeatureMatrix(config.column_names, stacked, mode),
            np.concatenate(label_arrays))


@dataclass(frozen=True)
class ExperimentResult:
    metrics: MetricsReport
    split: SplitAssignment
    model: TreeEnsembleModel
    manifest: dict


def _fmt_metric(value) -> str:
    return "undefined" if value is None else repr(float(value))


def format_metrics_report(report: MetricsReport, mode: FeatureMode,
                          model_kind: ModelKind, window_length: int,
                          seed: int) -> str:
    c = report.counts
    lines = [
        f"mode: {mode.value}",
        f"model: {model_kind.value}",
        f"window_length: {window_length}",
        f"precision: {_fmt_metric(report.precision)}",
        f"recall: {_fmt_metric(report.recall)}",
        f"f1: {_fmt_metric(report.f1)}",
        f"accuracy: {_fmt_metric(report.accuracy)}",
        f"tp: {c.tp}",
        f"fp: {c.fp}",
        f"fn: {c.fn}",
        f"tn: {c.tn}",
        f"seed: {seed}",
    ]
    return "\n".join(lines) + "\n"


def run_experiment(feeders, mode: FeatureMode = FeatureMode.OFFLINE,
                   model_kind: ModelKind = ModelKind.GRADIENT_BOOSTED,
                   train_params=None, feature_config=None, seed: int = 0,
                   decision_threshold: float = 0.5, split=None,
                   out_dir=None, feature_cache=None) -> ExperimentResult:
    """Train on the train feeders and report metrics on the held-out test
    feeders only.

    The experiment ``seed`` derives the split shuffle and, when no
    explicit ``train_params`` are given, the model seed. Artifacts
    (metrics report and manifest) are written under ``out_dir`` when set.
    """
    feeders = list(feeders)
    if split is None:
        split = split_by_feeder([f.feeder_id for f in feeders],
                                seed=mix_seed(seed, 1))
    if feature_config is None:
        feature_config = feature_config_for(mode, 360)
    if train_params is None:
        train_params = default_train_params(model_kind, seed=mix_seed(seed, 2))

    train_x, train_y = _featurize_group(feeders, split.train, mode,
                                        feature_config, feature_cache)
    if model_kind is ModelKind.RANDOM_FOREST:
        model = train_random_forest(train_x, train_y, train_params)
    else:
        model = train_gbdt(train_x, train_y, train_params)

    test_x, test_y = _featurize_group(feeders, split.test, mode,
                                      feature_config, feature_cache)
    predicted = classify(model, test_x, decision_threshold)
    report = metrics(confusion(test_y, predicted))

    window_length = feature_config.window_length
    overlap = set(split.test) & (set(split.train) | set(split.validation))
    manifest = {
        "experiment": {
            "mode": mode.value,
            "model": model_kind.value,
            "window_length": window_length,
            "seed": seed,
            "decision_threshold": decision_threshold,
        },
        "feature_config": _config_dict(feature_config),
        "train_params": _params_dict(train_params),
        "split": {
            "train": list(split.train),
            "validation": list(split.validation),
            "test": list(split.test),
        },
        "test_isolation_ok": not overlap,
        "metrics": {
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "accuracy": report.accuracy,
            "tp": report.counts.tp,
            "fp": report.counts.fp,
            "fn": report.counts.fn,
            "tn": report.counts.tn,
        },
    }
    if overlap:
        raise ValueError(f"test feeders leaked into training: {sorted(overlap)}")

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        text = format_metrics_report(report, mode, model_kind,
                                     window_length, seed)
        (out_dir / "metrics.txt").write_text(text, encoding="utf-8")
        with open(out_dir / "manifest.json", "w", encoding="utf-8",
                  newline="\n") as fh:
            json.dump(manifest, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return ExperimentResult(metrics=report, split=split, model=model,
                            manifest=manifest)


def _config_dict(config) -> dict:
    if isinstance(config, OfflineFeatureConfig):
        return {
            "mode": "offline",
            "window_length": config.window_length,
            "peak_threshold": config.peak_threshold,
            "centered_offset": config.centered_offset,
        }
    return {
        "mode": "online",
        "window_length": config.window_length,
        "short_window_length": config.short_window_length,
        "peak_threshold": config.peak_threshold,
    }


def _params_dict(params) -> dict:
    from dataclasses import asdict

    out = asdict(params)
    out["kind"] = ("random_forest" if isinstance(params, RandomForestParams)
                   else "gradient_boosted")
    return out


@dataclass(frozen=True)
class SweepResult:
    entries: tuple    # of (window_length, MetricsReport)

    def f1_by_length(self) -> dict:
        return {length: report.f1 for length, report in self.entries}


def sweep_csv_text(entries) -> str:
    lines = ["length,precision,recall,f1"]
    for length, report in entries:
        lines.append(
            f"{length},{_fmt_metric(report.precision)},"
            f"{_fmt_metric(report.recall)},{_fmt_metric(report.f1)}"
        )
    return "\n".join(lines) + "\n"


def window_length_sweep(lengths, feeders, mode: FeatureMode,
                        model_kind: ModelKind, train_params=None,
                        seed: int = 0, out_dir=None,
                        feature_cache=None) -> SweepResult:
    """Rerun the experiment once per window length with all else fixed."""
    lengths = list(lengths)
    if not lengths or any(n < 1 for n in lengths):
        raise ValueError("lengths must be positive integers")
    if lengths != sorted(lengths):
        raise ValueError("lengths must be sorted ascending")
    entries = []
    for length in lengths:
        config = feature_config_for(mode, length)
        sub_dir = Path(out_dir) / f"length-{length}" if out_dir else None
        result = run_experiment(
            feeders, mode=mode, model_kind=model_kind,
            train_params=train_params, feature_config=config, seed=seed,
            out_dir=sub_dir, feature_cache=feature_cache,
        )
        entries.append((length, result.metrics))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.csv").write_text(sweep_csv_text(entries),
                                           encoding="utf-8")
    return SweepResult(entries=tuple(entries))
