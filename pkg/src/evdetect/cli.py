"""Command-line pipeline: synth, featurize, train, detect, evaluate, sweep.

Every subcommand is a pure function of its flags and input files; all
randomness flows from explicit --seed flags, so repeated invocations
produce byte-identical outputs. Exit codes: 0 success, 1 runtime
failure (message prefixed ``error:`` on stderr), 2 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import timedelta
from pathlib import Path

import numpy as np

from .evaluate import (
    format_metrics_report,
    run_experiment,
    sweep_csv_text,
    window_length_sweep,
)
from .features import (
    FeatureMatrix,
    FeatureMode,
    OfflineFeatureConfig,
    OnlineFeatureConfig,
    featurize_series,
    read_feature_csv,
    write_feature_csv,
)
from .metrics import confusion, metrics
from .series import (
    SchemaMismatchError,
    format_timestamp,
    parse_timestamp,
    read_feeder_csv,
    write_feeder_csv,
    write_household_csv,
)
from .streaming import OnlineFeatureExtractor
from .synth import FeederSynthConfig, generate_benchmark
from .trees import (
    GradientBoostedParams,
    ModelKind,
    RandomForestParams,
    classify,
    deserialize_model,
    predict_proba,
    serialize_model,
    train_gbdt,
    train_random_forest,
)


class UsageError(ValueError):
    """Flag-level validation failure; maps to exit code 2."""


def _positive(value: int, flag: str) -> int:
    if value < 1:
        raise UsageError(f"{flag} must be >= 1, got {value}")
    return value


def cmd_synth(args) -> int:
    _positive(args.feeders, "--feeders")
    _positive(args.households, "--households")
    _positive(args.days, "--days")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    config = FeederSynthConfig(
        num_feeders=args.feeders,
        households_per_feeder=args.households,
        days=args.days,
        rng_seed=args.seed,
    )
    corpus = generate_benchmark(config)
    for feeder in corpus.feeders:
        write_feeder_csv(feeder, out / f"{feeder.feeder_id}.csv")
        for household in corpus.households[feeder.feeder_id]:
            write_household_csv(household, out / f"{household.household_id}.csv")
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(corpus.manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"wrote {len(corpus.feeders)} feeders to {out}")
    return 0


def _feature_config(mode: FeatureMode, window: int, short_window,
                    peak_threshold: float, offset: int):
    if mode is FeatureMode.OFFLINE:
        return OfflineFeatureConfig(window_length=window,
                                    peak_threshold=peak_threshold,
                                    centered_offset=offset)
    if short_window is None:
        short_window = max(1, window // 4)
    return OnlineFeatureConfig(window_length=window,
                               short_window_length=short_window,
                               peak_threshold=peak_threshold)


def cmd_featurize(args) -> int:
    _positive(args.window, "--window")
    mode = FeatureMode(args.mode)
    config = _feature_config(mode, args.window, args.short_window,
                             args.peak_threshold, args.offset)
    feeder = read_feeder_csv(args.input)
    matrix = featurize_series(feeder.load, mode, config)
    write_feature_csv(args.out, matrix, feeder.load.start,
                      feeder.load.interval_s, labels=feeder.labels)
    print(f"wrote {len(matrix)} rows x {len(matrix.column_names)} features "
          f"to {args.out}")
    return 0


def _train_params_from(args):
    if args.model == "rf":
        return RandomForestParams(
            n_trees=args.trees,
            max_depth=args.depth if args.depth is not None else 12,
            min_samples_leaf=args.min_samples_leaf,
            features_per_split=args.features_per_split,
            bootstrap=not args.no_bootstrap,
            seed=args.seed,
        )
    return GradientBoostedParams(
        n_rounds=args.rounds,
        max_depth=args.depth if args.depth is not None else 6,
        learning_rate=args.learning_rate,
        l2_leaf_regularization=args.l2,
        min_child_weight=args.min_child_weight,
        positive_class_weight=args.pos_weight,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    data = read_feature_csv(args.features)
    if data.labels is None:
        raise SchemaMismatchError(
            f"{args.features} has no label column; train needs labeled features"
        )
    params = _train_params_from(args)
    if args.model == "rf":
        model = train_random_forest(data.matrix, data.labels, params)
    else:
        model = train_gbdt(data.matrix, data.labels, params)
    serialize_model(model, args.out)
    print(f"wrote {model.kind.value} model with {len(model.trees)} trees "
          f"to {args.out}")
    return 0


def _detect_stream(args, model) -> int:
    config = _feature_config(FeatureMode.ONLINE, args.window,
                             args.short_window, args.peak_threshold, 0)
    extractor = OnlineFeatureExtractor(config)
    if extractor.column_names != model.feature_schema:
        raise SchemaMismatchError(
            f"model schema {model.feature_schema} does not match streaming "
            f"features {extractor.column_names}"
        )
    out = sys.stdout
    out.write("timestamp,probability,label\n")
    out.flush()
    row = np.empty((1, len(model.feature_schema)), dtype=np.float64)
    for line in iter(sys.stdin.readline, ""):
        line = line.strip()
        if not line or line.startswith("timestamp"):
            continue
        parts = line.split(",")
        ts = parse_timestamp(parts[0])
        row[0, :] = extractor.push(float(parts[1]))
        proba = float(predict_proba(model, row)[0])
        label = 1 if proba > args.threshold else 0
        out.write(f"{format_timestamp(ts)},{proba!r},{label}\n")
        out.flush()
    return 0


def cmd_detect(args) -> int:
    model = deserialize_model(args.model_file)
    if args.stream:
        return _detect_stream(args, model)
    if args.features is None or args.out is None:
        raise UsageError("--features and --out are required without --stream")
    data = read_feature_csv(args.features)
    if data.matrix.column_names != model.feature_schema:
        raise SchemaMismatchError(
            f"feature columns do not match model schema"
        )
    proba = predict_proba(model, data.matrix)
    labels = (proba > args.threshold).astype(np.uint8)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("timestamp,probability,label\n")
        for t in range(proba.shape[0]):
            ts = data.start + timedelta(seconds=t * data.interval_s)
            fh.write(f"{format_timestamp(ts)},{proba[t]!r},{labels[t]}\n")
    print(f"wrote {proba.shape[0]} detections to {args.out}")
    return 0


def _read_label_column(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n").split(",")
        if "label" not in header:
            raise SchemaMismatchError(f"{path} has no label column")
        idx = header.index("label")
        labels = []
        for line_no, line in enumerate(fh, start=2):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise SchemaMismatchError(
                    f"{path}: row at line {line_no} has {len(parts)} fields"
                )
            labels.append(int(float(parts[idx])))
    return np.asarray(labels, dtype=np.uint8)


def cmd_evaluate(args) -> int:
    truth = _read_label_column(args.truth)
    pred = _read_label_column(args.pred)
    report = metrics(confusion(truth, pred))
    def fmt(v):
        return "undefined" if v is None else repr(float(v))
    lines = [
        f"precision: {fmt(report.precision)}",
        f"recall: {fmt(report.recall)}",
        f"f1: {fmt(report.f1)}",
        f"accuracy: {fmt(report.accuracy)}",
        f"tp: {report.counts.tp}",
        f"fp: {report.counts.fp}",
        f"fn: {report.counts.fn}",
        f"tn: {report.counts.tn}",
    ]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return 0


def _load_feeder_dir(data_dir):
    data_dir = Path(data_dir)
    feeders = []
    for path in sorted(data_dir.glob("*.csv")):
        with open(path, "r", encoding="utf-8") as fh:
            if fh.readline().rstrip("\r\n") != "timestamp,load_kw,label":
                continue
        feeders.append(read_feeder_csv(path))
    if not feeders:
        raise UsageError(f"no feeder CSVs found in {data_dir}")
    return feeders


def cmd_sweep(args) -> int:
    lengths = [int(v) for v in args.lengths.split(",") if v]
    if not lengths:
        raise UsageError("--lengths must list at least one window length")
    mode = FeatureMode(args.mode)
    model_kind = ModelKind.RANDOM_FOREST if args.model == "rf" \
        else ModelKind.GRADIENT_BOOSTED
    feeders = _load_feeder_dir(args.data)
    result = window_length_sweep(
        lengths, feeders, mode, model_kind, seed=args.seed,
        out_dir=args.report_dir,
    )
    Path(args.out).write_text(sweep_csv_text(result.entries), encoding="utf-8")
    print(f"wrote {len(result.entries)}-row sweep to {args.out}")
    return 0


def cmd_experiment(args) -> int:
    mode = FeatureMode(args.mode)
    model_kind = ModelKind.RANDOM_FOREST if args.model == "rf" \
        else ModelKind.GRADIENT_BOOSTED
    feeders = _load_feeder_dir(args.data)
    config = _feature_config(mode, args.window, args.short_window,
                             args.peak_threshold, 0)
    result = run_experiment(feeders, mode=mode, model_kind=model_kind,
                            feature_config=config, seed=args.seed,
                            out_dir=args.out)
    print(format_metrics_report(result.metrics, mode, model_kind,
                                args.window, args.seed), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evdetect",
        description="Feeder-level EV charging detection pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labeled corpus")
    p.add_argument("--feeders", type=int, required=True)
    p.add_argument("--households", type=int, default=3)
    p.add_argument("--days", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("featurize", help="extract features from a feeder CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--mode", choices=("offline", "online"), required=True)
    p.add_argument("--window", type=int, default=360)
    p.add_argument("--short-window", type=int, default=None)
    p.add_argument("--peak-threshold", type=float, default=1.0)
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train a model on a feature CSV")
    p.add_argument("--features", required=True)
    p.add_argument("--model", choices=("gbdt", "rf"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--learning-rate", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--min-child-weight", type=float, default=1.0)
    p.add_argument("--pos-weight", type=float, default=1.0)
    p.add_argument("--min-samples-leaf", type=int, default=5)
    p.add_argument("--features-per-split", type=int, default=0)
    p.add_argument("--no-bootstrap", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="predict charging state")
    p.add_argument("--model", dest="model_file", required=True)
    p.add_argument("--features", default=None,
                   help="feature CSV (batch mode)")
    p.add_argument("--out", default=None)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--stream", action="store_true",
                   help="read raw feeder rows from stdin, detect per row")
    p.add_argument("--window", type=int, default=360)
    p.add_argument("--short-window", type=int, default=None)
    p.add_argument("--peak-threshold", type=float, default=1.0)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("evaluate", help="compare two label CSVs")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="window-length sweep over a corpus")
    p.add_argument("--data", required=True, help="directory of feeder CSVs")
    p.add_argument("--lengths", required=True, help="comma-separated lengths")
    p.add_argument("--mode", choices=("offline", "online"), required=True)
    p.add_argument("--model", choices=("gbdt", "rf"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="sweep CSV path")
    p.add_argument("--report-dir", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("experiment", help="split, train and evaluate a corpus")
    p.add_argument("--data", required=True)
    p.add_argument("--mode", choices=("offline", "online"), required=True)
    p.add_argument("--model", choices=("gbdt", "rf"), required=True)
    p.add_argument("--window", type=int, default=360)
    p.add_argument("--short-window", type=int, default=None)
    p.add_argument("--peak-threshold", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="artifact directory")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
