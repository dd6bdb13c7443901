"""Random forest and Newton-boosted tree ensembles over feature matrices.

Both models share one flat tree representation (parallel node arrays, a
node is internal iff its feature index is >= 0; rows with value < the
threshold go left) and one exact greedy split search over sorted unique
feature values. Ties between equal-gain splits resolve to the lowest
feature index, then the lowest threshold, making training fully
deterministic for a given seed.

The boosted model fits the logistic loss: per round g = p - y and
h = p(1-p) (scaled by positive_class_weight for positive rows), leaf
weight -sum(g)/(sum(h) + lambda), learning-rate shrinkage baked into the
stored leaf values, and the training log-loss recorded round by round.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import _kernels
from .features import FeatureMatrix
from .seeding import mix_seed
from .series import ChargingLabelSeries, SchemaMismatchError

FORMAT_VERSION = 1


class ModelKind(enum.Enum):
    RANDOM_FOREST = "random_forest"
    GRADIENT_BOOSTED = "gradient_boosted"


class ShapeMismatchError(ValueError):
    pass


class NonBinaryLabelsError(ValueError):
    pass


class NotTrainedError(ValueError):
    pass


class UnsupportedVersionError(ValueError):
    pass


class CorruptModelError(ValueError):
    pass


class DegenerateDataWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RandomForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 5
    features_per_split: int = 0     # 0 -> ceil(sqrt(n_features))
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_trees, max_depth and min_samples_leaf must be >= 1")
        if self.features_per_split < 0:
            raise ValueError("features_per_split must be >= 0")


@dataclass(frozen=True)
class GradientBoostedParams:
    n_rounds: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    l2_leaf_regularization: float = 1.0
    min_child_weight: float = 1.0
    positive_class_weight: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_rounds < 1 or self.max_depth < 1:
            raise ValueError("n_rounds and max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.l2_leaf_regularization < 0:
            raise ValueError("l2_leaf_regularization must be >= 0")
        if self.min_child_weight < 0:
            raise ValueError("min_child_weight must be >= 0")
        if self.positive_class_weight <= 0:
            raise ValueError("positive_class_weight must be > 0")


@dataclass(frozen=True)
class Tree:
    """Flat node arrays; leaves have feature == -1 and carry the value."""

    feature: np.ndarray     # int32
    threshold: np.ndarray   # float64
    left: np.ndarray        # int32
    right: np.ndarray       # int32
    value: np.ndarray       # float64

    def __post_init__(self):
        for name, dtype in (("feature", np.int32), ("threshold", np.float64),
                            ("left", np.int32), ("right", np.int32),
                            ("value", np.float64)):
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=dtype))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.n_nodes else 0


@dataclass(frozen=True)
class TreeEnsembleModel:
    kind: ModelKind
    trees: tuple
    base_score: float
    feature_schema: tuple
    training_params: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "feature_schema", tuple(self.feature_schema))


def _as_matrix(features) -> tuple[np.ndarray, tuple | None]:
    if isinstance(features, FeatureMatrix):
        return features.values, features.column_names
    arr = np.ascontiguousarray(np.asarray(features, dtype=np.float64))
    if arr.ndim != 2:
        raise ShapeMismatchError(f"features must be 2-d, got shape {arr.shape}")
    return arr, None


def _as_label_array(labels) -> np.ndarray:
    if isinstance(labels, ChargingLabelSeries):
        return labels.labels
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise ShapeMismatchError(f"labels must be 1-d, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise NonBinaryLabelsError("labels must all be 0 or 1")
    return arr.astype(np.uint8)


def _check_training_inputs(features, labels):
    x, names = _as_matrix(features)
    y = _as_label_array(labels)
    if x.shape[0] != y.shape[0]:
        raise ShapeMismatchError(
            f"{x.shape[0]} feature rows vs {y.shape[0]} labels"
        )
    if x.shape[0] < 2:
        raise ShapeMismatchError("training needs at least 2 rows")
    if not np.isfinite(x).all():
        raise ValueError("features contain non-finite values")
    if names is None:
        names = tuple(f"x{i}" for i in range(x.shape[1]))
    return x, y, names


def _presort(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature stable sort order and the values in that order."""
    n, d = x.shape
    sorted_idx = np.empty((d, n), dtype=np.int32)
    val_sorted = np.empty((d, n), dtype=np.float64)
    for j in range(d):
        order = np.argsort(x[:, j], kind="stable").astype(np.int32)
        sorted_idx[j] = order
        val_sorted[j] = x[order, j]
    return sorted_idx, val_sorted


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1.0 - 1e-15)
    return float(-np.mean(np.where(y == 1, np.log(p), np.log(1.0 - p))))


def _leaf_weight(g: float, h: float, lam: float, learning_rate: float) -> float:
    denom = h + lam
    if denom <= 1e-12:
        return 0.0
    return -learning_rate * g / denom


def _prior_log_odds(positive_rate: float) -> float:
    if positive_rate <= 0.0:
        return -10.0
    if positive_rate >= 1.0:
        return 10.0
    return float(np.clip(math.log(positive_rate / (1.0 - positive_rate)),
                         -10.0, 10.0))


def train_gbdt(features, labels, params: GradientBoostedParams | None = None
               ) -> TreeEnsembleModel:
    """Fit a boosted ensemble on the logistic loss."""
    if params is None:
        params = GradientBoostedParams()
    x, y, names = _check_training_inputs(features, labels)
    n, d = x.shape
    sorted_idx, val_sorted = _presort(x)
    x_cols = np.ascontiguousarray(x.T)
    y_f = y.astype(np.float64)
    pw = params.positive_class_weight
    lam = params.l2_leaf_regularization
    base_score = _prior_log_odds(float(y_f.mean()))

    y_sorted = np.empty((d, n), dtype=np.float64)
    _kernels.gather_sorted(y_f, sorted_idx, y_sorted)
    p_sorted = np.empty((d, n), dtype=np.float64)

    scores = np.full(n, base_score, dtype=np.float64)
    loss_history = []
    trees = []
    w = 1.0 + (pw - 1.0) * y_f
    for _ in range(params.n_rounds):
        p = _sigmoid(scores)
        # loss of the model as of the previous round (prior before round 1)
        loss_history.append(_log_loss(y, p))
        g = w * (p - y_f)
        h = w * p * (1.0 - p)
        _kernels.gather_sorted(p, sorted_idx, p_sorted)
        tree = _grow_newton_tree(sorted_idx, val_sorted, x_cols,
                                 p_sorted, y_sorted,
                                 float(g.sum()), float(h.sum()),
                                 params, scores)
        trees.append(tree)
    loss_history.append(_log_loss(y, _sigmoid(scores)))

    return TreeEnsembleModel(
        kind=ModelKind.GRADIENT_BOOSTED,
        trees=tuple(trees),
        base_score=base_score,
        feature_schema=names,
        training_params={"train": asdict(params), "loss_history": loss_history},
    )


def _grow_newton_tree(sorted_idx, val_sorted, x_cols, p_sorted, y_sorted,
                      root_g, root_h, params: GradientBoostedParams,
                      scores) -> Tree:
    """Grow one level-wise tree and fold its leaf values into ``scores``."""
    n = scores.shape[0]
    lam = params.l2_leaf_regularization
    lr = params.learning_rate
    node_of = np.zeros(n, dtype=np.int32)

    feat = [-1]
    thr = [0.0]
    left = [-1]
    right = [-1]
    value = [0.0]
    frontier_ids = [0]
    frontier_g = np.array([root_g])
    frontier_h = np.array([root_h])

    for _ in range(params.max_depth):
        m = len(frontier_ids)
        best_gain = np.zeros(m)          # only strictly positive gains split
        best_feat = np.full(m, -1, dtype=np.int32)
        best_thr = np.zeros(m)
        best_gl = np.zeros(m)
        best_hl = np.zeros(m)
        _kernels.scan_level_newton(
            sorted_idx, val_sorted, p_sorted, y_sorted, node_of,
            frontier_g, frontier_h, lam, params.min_child_weight,
            params.positive_class_weight,
            best_gain, best_feat, best_thr, best_gl, best_hl,
        )
        child_slot = np.full(m, -1, dtype=np.int32)
        leaf_value = np.zeros(m)
        new_ids = []
        new_g = []
        new_h = []
        slot = 0
        for t in range(m):
            node_id = frontier_ids[t]
            if best_feat[t] >= 0:
                child_slot[t] = slot
                slot += 2
                li = len(feat)
                feat[node_id] = int(best_feat[t])
                thr[node_id] = float(best_thr[t])
                left[node_id] = li
                right[node_id] = li + 1
                for _child in range(2):
                    feat.append(-1)
                    thr.append(0.0)
                    left.append(-1)
                    right.append(-1)
                    value.append(0.0)
                new_ids.extend((li, li + 1))
                gl, hl = float(best_gl[t]), float(best_hl[t])
                new_g.extend((gl, float(frontier_g[t]) - gl))
                new_h.extend((hl, float(frontier_h[t]) - hl))
            else:
                v = _leaf_weight(float(frontier_g[t]), float(frontier_h[t]), lam, lr)
                leaf_value[t] = v
                value[node_id] = v
        _kernels.apply_splits_scored(node_of, x_cols, best_feat, best_thr,
                                     child_slot, leaf_value, scores)
        if not new_ids:
            frontier_ids = []
            break
        frontier_ids = new_ids
        frontier_g = np.array(new_g)
        frontier_h = np.array(new_h)

    if frontier_ids:
        m = len(frontier_ids)
        leaf_value = np.zeros(m)
        for t, node_id in enumerate(frontier_ids):
            v = _leaf_weight(float(frontier_g[t]), float(frontier_h[t]), lam, lr)
            leaf_value[t] = v
            value[node_id] = v
        _kernels.apply_splits_scored(
            node_of, x_cols, np.full(m, -1, dtype=np.int32), np.zeros(m),
            np.full(m, -1, dtype=np.int32), leaf_value, scores,
        )
    return Tree(feat, thr, left, right, value)


def train_random_forest(features, labels,
                        params: RandomForestParams | None = None
                        ) -> TreeEnsembleModel:
    """Fit a bootstrap-aggregated forest of Gini trees."""
    if params is None:
        params = RandomForestParams()
    x, y, names = _check_training_inputs(features, labels)
    n, d = x.shape
    sorted_idx, val_sorted = _presort(x)
    x_cols = np.ascontiguousarray(x.T)
    y_f = y.astype(np.float64)
    fps = params.features_per_split or int(math.ceil(math.sqrt(d)))
    fps = min(fps, d)

    y_sorted = np.empty((d, n), dtype=np.float64)
    _kernels.gather_sorted(y_f, sorted_idx, y_sorted)
    w_sorted = np.empty((d, n), dtype=np.float64)

    trees = []
    for tree_index in range(params.n_trees):
        rng = np.random.Generator(np.random.PCG64(mix_seed(params.seed, tree_index)))
        if params.bootstrap:
            counts = np.bincount(rng.integers(0, n, n), minlength=n)
            w = counts.astype(np.float64)
        else:
            w = np.ones(n, dtype=np.float64)
        _kernels.gather_sorted(w, sorted_idx, w_sorted)
        trees.append(_grow_gini_tree(sorted_idx, val_sorted, x_cols, y_f, w,
                                     w_sorted, y_sorted, params, fps, d, rng))

    labels_mixed = 0 < y.sum() < n
    if labels_mixed and all(t.n_nodes == 1 for t in trees):
        warnings.warn(
            "no usable split found on mixed labels; forest is all single leaves",
            DegenerateDataWarning,
        )
    return TreeEnsembleModel(
        kind=ModelKind.RANDOM_FOREST,
        trees=tuple(trees),
        base_score=0.0,
        feature_schema=names,
        training_params={"train": asdict(params)},
    )


def _grow_gini_tree(sorted_idx, val_sorted, x_cols, y_f, w,
                    w_sorted, y_sorted,
                    params: RandomForestParams, fps: int, d: int, rng) -> Tree:
    n = y_f.shape[0]
    msl = float(params.min_samples_leaf)
    node_of = np.where(w > 0, 0, -1).astype(np.int32)

    feat = [-1]
    thr = [0.0]
    left = [-1]
    right = [-1]
    value = [0.0]
    frontier_ids = [0]
    frontier_w = np.array([float(w.sum())])
    frontier_c1 = np.array([float((w * y_f).sum())])

    for _ in range(params.max_depth):
        m = len(frontier_ids)
        feat_ok = np.zeros((m, d), dtype=np.uint8)
        splittable = []
        for t in range(m):
            wt, c1 = frontier_w[t], frontier_c1[t]
            if c1 <= 0.0 or c1 >= wt or wt < 2.0 * msl:
                continue
            feat_ok[t, rng.choice(d, fps, replace=False)] = 1
            splittable.append(t)
        best_dec = np.full(m, -np.inf)
        best_feat = np.full(m, -1, dtype=np.int32)
        best_thr = np.zeros(m)
        best_wl = np.zeros(m)
        best_c1l = np.zeros(m)
        if splittable:
            _kernels.scan_level_gini(
                sorted_idx, val_sorted, w_sorted, y_sorted, node_of,
                frontier_w, frontier_c1, feat_ok, msl,
                best_dec, best_feat, best_thr, best_wl, best_c1l,
            )
        child_slot = np.full(m, -1, dtype=np.int32)
        new_ids = []
        new_w = []
        new_c1 = []
        slot = 0
        for t in range(m):
            node_id = frontier_ids[t]
            if best_feat[t] >= 0:
                child_slot[t] = slot
                slot += 2
                li = len(feat)
                feat[node_id] = int(best_feat[t])
                thr[node_id] = float(best_thr[t])
                left[node_id] = li
                right[node_id] = li + 1
                for _child in range(2):
                    feat.append(-1)
                    thr.append(0.0)
                    left.append(-1)
                    right.append(-1)
                    value.append(0.0)
                new_ids.extend((li, li + 1))
                wl, c1l = float(best_wl[t]), float(best_c1l[t])
                new_w.extend((wl, float(frontier_w[t]) - wl))
                new_c1.extend((c1l, float(frontier_c1[t]) - c1l))
            else:
                value[node_id] = float(frontier_c1[t]) / float(frontier_w[t])
        _kernels.apply_splits(node_of, x_cols, best_feat, best_thr, child_slot)
        if not new_ids:
            frontier_ids = []
            break
        frontier_ids = new_ids
        frontier_w = np.array(new_w)
        frontier_c1 = np.array(new_c1)

    for t, node_id in enumerate(frontier_ids):
        value[node_id] = float(frontier_c1[t]) / float(frontier_w[t])
    return Tree(feat, thr, left, right, value)


def _flatten_trees(trees) -> tuple:
    offsets = []
    feats = []
    thrs = []
    lefts = []
    rights = []
    values = []
    base = 0
    for tree in trees:
        offsets.append(base)
        feats.append(tree.feature)
        thrs.append(tree.threshold)
        shifted_left = np.where(tree.left >= 0, tree.left + base, -1)
        shifted_right = np.where(tree.right >= 0, tree.right + base, -1)
        lefts.append(shifted_left.astype(np.int32))
        rights.append(shifted_right.astype(np.int32))
        values.append(tree.value)
        base += tree.n_nodes
    return (
        np.concatenate(feats), np.concatenate(thrs),
        np.concatenate(lefts), np.concatenate(rights),
        np.concatenate(values), np.asarray(offsets, dtype=np.int32),
    )


def predict_proba(model: TreeEnsembleModel, features) -> np.ndarray:
    """Per-row probability of the positive (charging) class."""
    if not model.trees:
        raise NotTrainedError("model has no trees")
    x, names = _as_matrix(features)
    if names is not None:
        if names != model.feature_schema:
            raise SchemaMismatchError(
                f"feature columns {names} do not match model schema "
                f"{model.feature_schema}"
            )
    elif x.shape[1] != len(model.feature_schema):
        raise SchemaMismatchError(
            f"expected {len(model.feature_schema)} feature columns, "
            f"got {x.shape[1]}"
        )
    feat_all, thr_all, left_all, right_all, value_all, roots = \
        _flatten_trees(model.trees)
    out = np.empty(x.shape[0], dtype=np.float64)
    _kernels.predict_sum(x, feat_all, thr_all, left_all, right_all,
                         value_all, roots, out)
    if model.kind is ModelKind.RANDOM_FOREST:
        return out / len(model.trees)
    return _sigmoid(model.base_score + out)


def classify(model: TreeEnsembleModel, features,
             decision_threshold: float = 0.5) -> ChargingLabelSeries:
    """Label 1 exactly where the predicted probability exceeds the
    threshold (strictly)."""
    proba = predict_proba(model, features)
    return ChargingLabelSeries((proba > decision_threshold).astype(np.uint8))


def serialize_model(model: TreeEnsembleModel, path) -> None:
    """Write the canonical JSON model file (stable bytes for a given model)."""
    doc = {
        "format_version": model.format_version,
        "kind": model.kind.value,
        "params": model.training_params,
        "feature_schema": list(model.feature_schema),
        "base_score": model.base_score,
        "trees": [
            {
                "feature": t.feature.tolist(),
                "threshold": t.threshold.tolist(),
                "left": t.left.tolist(),
                "right": t.right.tolist(),
                "value": t.value.tolist(),
            }
            for t in model.trees
        ],
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    with open(Path(path), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def _corrupt(msg: str) -> CorruptModelError:
    return CorruptModelError(f"model file invalid: {msg}")


def deserialize_model(path) -> TreeEnsembleModel:
    try:
        with open(Path(path), "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise _corrupt(str(exc)) from exc
    if not isinstance(doc, dict):
        raise _corrupt("top level must be an object")
    version = doc.get("format_version")
    if version is None:
        raise _corrupt("missing format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"format_version {version} not supported (expected {FORMAT_VERSION})"
        )
    try:
        kind = ModelKind(doc["kind"])
        schema = tuple(str(c) for c in doc["feature_schema"])
        base_score = float(doc["base_score"])
        params = doc["params"]
        raw_trees = doc["trees"]
    except (KeyError, ValueError, TypeError) as exc:
        raise _corrupt(str(exc)) from exc
    if not isinstance(raw_trees, list) or not raw_trees:
        raise _corrupt("trees must be a non-empty list")
    trees = []
    for ti, raw in enumerate(raw_trees):
        try:
            tree = Tree(raw["feature"], raw["threshold"], raw["left"],
                        raw["right"], raw["value"])
        except (KeyError, ValueError, TypeError) as exc:
            raise _corrupt(f"tree {ti}: {exc}") from exc
        n_nodes = tree.n_nodes
        if n_nodes == 0:
            raise _corrupt(f"tree {ti} is empty")
        for name in ("threshold", "left", "right", "value"):
            if getattr(tree, name).shape[0] != n_nodes:
                raise _corrupt(f"tree {ti}: node array lengths differ")
        if not np.isfinite(tree.threshold).all() or not np.isfinite(tree.value).all():
            raise _corrupt(f"tree {ti}: non-finite node data")
        internal = tree.feature >= 0
        if (tree.feature[internal] >= len(schema)).any():
            raise _corrupt(f"tree {ti}: feature index out of schema range")
        kids = np.concatenate([tree.left[internal], tree.right[internal]])
        if internal.any() and ((kids < 0) | (kids >= n_nodes)).any():
            raise _corrupt(f"tree {ti}: child index out of range")
        if ((tree.left[~internal] != -1) | (tree.right[~internal] != -1)).any():
            raise _corrupt(f"tree {ti}: leaves must have children set to -1")
        trees.append(tree)
    return TreeEnsembleModel(
        kind=kind,
        trees=tuple(trees),
        base_score=base_score,
        feature_schema=schema,
        training_params=params if isinstance(params, dict) else {},
        format_version=int(version),
    )
