"""From-scratch random-forest classifier for voxel feature vectors.

Deterministic by construction: all randomness flows from one SplitMix64
seed, each tree draws from its own spawned stream keyed by tree index, and
split ties resolve to the lowest feature index then the lowest threshold.
Training the same data with the same seed yields a byte-identical model
file.

Trees are stored as flat parallel arrays (feature, threshold, left, right,
class-probability rows); interior nodes route x[feature] <= threshold to
the left child, and leaves carry feature == -1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadHyperparameters, BadModelFile, BadParams, DimensionMismatch,
                     EmptyClass, IoFailure, VersionMismatch)
from .filters import FeatureBankConfig, build_feature_stack
from .rng import SplitMix64
from .volume import Volume

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestHyperparameters:
    n_trees: int = 100
    max_depth: int = 16
    min_samples_split: int = 2
    features_per_split: int | None = None
    bag_fraction: float = 1.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise BadHyperparameters(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise BadHyperparameters(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise BadHyperparameters(
                f"min_samples_split must be >= 2, got {self.min_samples_split}")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise BadHyperparameters(
                f"features_per_split must be >= 1, got {self.features_per_split}")
        if not 0.0 < self.bag_fraction <= 1.0:
            raise BadHyperparameters(
                f"bag_fraction must be in (0, 1], got {self.bag_fraction}")

    def resolved_features_per_split(self, n_features: int) -> int:
        if self.features_per_split is not None:
            if self.features_per_split > n_features:
                raise BadHyperparameters(
                    f"features_per_split {self.features_per_split} exceeds "
                    f"feature count {n_features}")
            return self.features_per_split
        return max(1, min(n_features, math.ceil(math.sqrt(n_features))))

    def to_json_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "features_per_split": self.features_per_split,
            "bag_fraction": self.bag_fraction,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ForestHyperparameters":
        return cls(
            n_trees=int(d["n_trees"]),
            max_depth=int(d["max_depth"]),
            min_samples_split=int(d["min_samples_split"]),
            features_per_split=(None if d.get("features_per_split") is None
                                else int(d["features_per_split"])),
            bag_fraction=float(d["bag_fraction"]),
        )


@dataclass
class TrainingSet:
    """Labeled feature vectors: features (N, F) and class ids (N,)."""

    features: np.ndarray
    labels: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise BadParams(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise BadParams(
                f"labels shape {self.labels.shape} does not match "
                f"{self.features.shape[0]} samples")
        n_classes = len(self.class_names)
        if n_classes < 1:
            raise BadParams("need at least 1 class name")
        if not np.isfinite(self.features).all():
            raise BadParams("features must be finite")
        if self.features.shape[0] == 0:
            raise EmptyClass("training set has no samples")
        if self.labels.min() < 0 or self.labels.max() >= n_classes:
            raise BadParams(
                f"labels must lie in [0, {n_classes}), got range "
                f"[{self.labels.min()}, {self.labels.max()}]")
        counts = np.bincount(self.labels, minlength=n_classes)
        missing = [self.class_names[i] for i in range(n_classes) if counts[i] == 0]
        if missing:
            raise EmptyClass(f"classes with no samples: {missing}")
        thin = [self.class_names[i] for i in range(n_classes) if counts[i] == 1]
        if thin:
            raise BadParams(f"classes need >= 2 samples each, got 1 in: {thin}")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class _Tree:
    feature: np.ndarray    # (n_nodes,) int32, -1 at leaves
    threshold: np.ndarray  # (n_nodes,) float64, 0.0 at leaves
    left: np.ndarray       # (n_nodes,) int32, -1 at leaves
    right: np.ndarray      # (n_nodes,) int32, -1 at leaves
    probs: np.ndarray      # (n_nodes, n_classes) float64

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index for each row of x, via level-synchronous descent."""
        node = np.zeros(x.shape[0], dtype=np.int32)
        active = np.nonzero(self.feature[node] >= 0)[0]
        while active.size:
            cur = node[active]
            go_left = x[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return node

    def to_json_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "probs": self.probs.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict, n_classes: int) -> "_Tree":
        try:
            tree = cls(
                feature=np.asarray(d["feature"], dtype=np.int32),
                threshold=np.asarray(d["threshold"], dtype=np.float64),
                left=np.asarray(d["left"], dtype=np.int32),
                right=np.asarray(d["right"], dtype=np.int32),
                probs=np.asarray(d["probs"], dtype=np.float64),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise BadModelFile(f"malformed tree record: {exc}") from exc
        n = tree.feature.shape[0]
        same_len = all(a.shape[0] == n for a in (tree.threshold, tree.left, tree.right))
        if n == 0 or not same_len or tree.probs.shape != (n, n_classes):
            raise BadModelFile("tree arrays have inconsistent lengths")
        return tree


class _TreeBuilder:
    """Grows one CART tree on a bootstrap sample with Gini splits."""

    def __init__(self, x, y, n_classes, hp, mtry, rng):
        self.x = x
        self.y = y
        self.n_classes = n_classes
        self.hp = hp
        self.mtry = mtry
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.probs: list[np.ndarray] = []

    def build(self) -> _Tree:
        self._grow(np.arange(self.x.shape[0]), depth=0)
        return _Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            probs=np.asarray(self.probs, dtype=np.float64),
        )

    def _add_node(self, counts: np.ndarray) -> int:
        idx = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.probs.append(counts / counts.sum())
        return idx

    def _grow(self, idx: np.ndarray, depth: int) -> int:
        counts = np.bincount(self.y[idx], minlength=self.n_classes).astype(np.float64)
        node = self._add_node(counts)
        n = idx.size
        if (depth >= self.hp.max_depth or n < self.hp.min_samples_split
                or np.count_nonzero(counts) <= 1):
            return node
        split = self._best_split(idx)
        if split is None:
            return node
        f, t = split
        go_left = self.x[idx, f] <= t
        # children are appended after this node, left subtree first
        self.feature[node] = f
        self.threshold[node] = t
        self.left[node] = self._grow(idx[go_left], depth + 1)
        self.right[node] = self._grow(idx[~go_left], depth + 1)
        return node

    def _best_split(self, idx: np.ndarray) -> tuple[int, float] | None:
        n_features = self.x.shape[1]
        chosen = self.rng.sample_without_replacement(n_features, self.mtry)
        best: tuple[float, int, float] | None = None
        for f in sorted(chosen):
            found = self._scan_feature(idx, f)
            if found is None:
                continue
            score, thr = found
            # strict < keeps the lowest feature index, lowest threshold on ties
            if best is None or score < best[0]:
                best = (score, f, thr)
        if best is None:
            return None
        return best[1], best[2]

    def _scan_feature(self, idx: np.ndarray, f: int) -> tuple[float, float] | None:
        values = self.x[idx, f]
        order = np.argsort(values, kind="stable")
        v = values[order]
        y = self.y[idx][order]
        boundaries = np.nonzero(v[1:] > v[:-1])[0]
        if boundaries.size == 0:
            return None
        n = v.size
        onehot = np.zeros((n, self.n_classes), dtype=np.float64)
        onehot[np.arange(n), y] = 1.0
        prefix = np.cumsum(onehot, axis=0)
        left_counts = prefix[boundaries]
        total = prefix[-1]
        right_counts = total[None, :] - left_counts
        n_left = boundaries + 1.0
        n_right = n - n_left
        gini_left = 1.0 - ((left_counts / n_left[:, None]) ** 2).sum(axis=1)
        gini_right = 1.0 - ((right_counts / n_right[:, None]) ** 2).sum(axis=1)
        weighted = (n_left * gini_left + n_right * gini_right) / n
        best = int(np.argmin(weighted))  # argmin takes first -> lowest threshold
        b = boundaries[best]
        thr = 0.5 * (v[b] + v[b + 1])
        return float(weighted[best]), float(thr)


@dataclass
class ForestModel:
    """Trained forest plus everything needed to reproduce its features."""

    hyperparameters: ForestHyperparameters
    feature_bank: FeatureBankConfig
    class_names: list[str]
    rng_seed: int
    trees: list[_Tree] = field(repr=False)
    oob_accuracy: float | None = None

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_features(self) -> int:
        return self.feature_bank.feature_count

    def _check_features(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise DimensionMismatch(
                f"expected feature matrix (N, {self.n_features}), got {x.shape}")
        return x

    def predict_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Class ids and mean leaf probabilities for a feature matrix.

        Ids are the argmax of the averaged probability rows; ties break to
        the lowest class id.
        """
        x = self._check_features(x)
        probs = np.zeros((x.shape[0], self.n_classes), dtype=np.float64)
        for tree in self.trees:
            probs += tree.probs[tree.apply(x)]
        probs /= len(self.trees)
        labels = np.argmax(probs, axis=1).astype(np.int64)
        return labels, probs

    def predict(self, x: np.ndarray) -> tuple[int, np.ndarray]:
        """Class id and probability vector for one feature vector."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise DimensionMismatch(
                f"expected a feature vector of length {self.n_features}, "
                f"got shape {x.shape}")
        labels, probs = self.predict_batch(x[None, :])
        return int(labels[0]), probs[0]

    def to_json_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "hyperparameters": self.hyperparameters.to_json_dict(),
            "feature_bank": self.feature_bank.to_json_dict(),
            "class_names": list(self.class_names),
            "rng_seed": self.rng_seed,
            "oob_accuracy": self.oob_accuracy,
            "trees": [t.to_json_dict() for t in self.trees],
        }


def train_forest(training: TrainingSet, hp: ForestHyperparameters,
                 feature_bank: FeatureBankConfig, *, seed: int = 0) -> ForestModel:
    """Fit a forest of Gini CART trees on bootstrap samples.

    Each tree t uses the stream spawn(t) of the root SplitMix64 generator,
    so models with more trees extend, rather than reshuffle, smaller ones.
    Out-of-bag accuracy is evaluated on samples left out of each bootstrap;
    it is None when every sample landed in every bag.
    """
    if feature_bank.feature_count != training.n_features:
        raise DimensionMismatch(
            f"feature bank yields {feature_bank.feature_count} features but "
            f"training set has {training.n_features}")
    root = SplitMix64(seed)
    n = training.n_samples
    n_classes = len(training.class_names)
    mtry = hp.resolved_features_per_split(training.n_features)
    draws = max(1, round(hp.bag_fraction * n))

    trees: list[_Tree] = []
    oob_probs = np.zeros((n, n_classes), dtype=np.float64)
    oob_votes = np.zeros(n, dtype=np.int64)
    for t in range(hp.n_trees):
        rng = root.spawn(t)
        bag = rng.bootstrap_indices(n, draws)
        builder = _TreeBuilder(training.features[bag], training.labels[bag],
                               n_classes, hp, mtry, rng)
        tree = builder.build()
        trees.append(tree)
        in_bag = np.zeros(n, dtype=bool)
        in_bag[bag] = True
        out = np.nonzero(~in_bag)[0]
        if out.size:
            oob_probs[out] += tree.probs[tree.apply(training.features[out])]
            oob_votes[out] += 1

    voted = oob_votes > 0
    if voted.any():
        pred = np.argmax(oob_probs[voted] / oob_votes[voted, None], axis=1)
        oob_accuracy = float(np.mean(pred == training.labels[voted]))
    else:
        oob_accuracy = None
    return ForestModel(hyperparameters=hp, feature_bank=feature_bank,
                       class_names=list(training.class_names), rng_seed=seed,
                       trees=trees, oob_accuracy=oob_accuracy)


def segment_volume(model: ForestModel, volume: Volume, *,
                   chunk_voxels: int = 1 << 20) -> tuple[Volume, Volume]:
    """Per-voxel classification of a grayscale volume.

    Returns the label volume and a confidence volume holding each voxel's
    maximum class probability.
    """
    stack = build_feature_stack(volume, model.feature_bank)
    x = stack.as_matrix()
    labels = np.empty(x.shape[0], dtype=np.uint8)
    confidence = np.empty(x.shape[0], dtype=np.float64)
    for start in range(0, x.shape[0], chunk_voxels):
        block = x[start:start + chunk_voxels]
        ids, probs = model.predict_batch(block)
        labels[start:start + chunk_voxels] = ids.astype(np.uint8)
        confidence[start:start + chunk_voxels] = probs.max(axis=1)
    nz, ny, nx = volume.data.shape
    label_vol = volume.with_data(labels.reshape(nz, ny, nx), value_kind="label",
                                 element_encoding="u8")
    conf_vol = volume.with_data(confidence.reshape(nz, ny, nx),
                                value_kind="grayscale", element_encoding="f32")
    return label_vol, conf_vol


def save_model(model: ForestModel, path) -> None:
    text = json.dumps(model.to_json_dict(), sort_keys=True, indent=2)
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write model file {path}: {exc}") from exc


def load_model(path) -> ForestModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise BadModelFile(f"model file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise BadModelFile("model file must hold a JSON object")
    version = raw.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise VersionMismatch(
            f"model format version {version!r} is not supported "
            f"(expected {MODEL_FORMAT_VERSION})")
    try:
        hp = ForestHyperparameters.from_json_dict(raw["hyperparameters"])
        bank = FeatureBankConfig.from_json_dict(raw["feature_bank"])
        class_names = [str(c) for c in raw["class_names"]]
        seed = int(raw["rng_seed"])
        oob = raw.get("oob_accuracy")
        trees = [_Tree.from_json_dict(t, len(class_names)) for t in raw["trees"]]
    except BadModelFile:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise BadModelFile(f"model file {path} is malformed: {exc}") from exc
    if len(class_names) < 1:
        raise BadModelFile("model must declare at least 1 class")
    if not trees:
        raise BadModelFile("model holds no trees")
    return ForestModel(hyperparameters=hp, feature_bank=bank, class_names=class_names,
                       rng_seed=seed, trees=trees,
                       oob_accuracy=None if oob is None else float(oob))


def load_labels_csv(path, dims: tuple[int, int, int] | None = None):
    """Read voxel annotations as (coords (N, 3) x,y,z, class ids (N,)).

    Expects rows of x,y,z,class_id with an optional header. Coordinates are
    checked against dims when given.
    """
    coords: list[tuple[int, int, int]] = []
    labels: list[int] = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            for row_no, row in enumerate(reader, start=1):
                if not row or (row_no == 1 and not _is_int(row[0])):
                    continue  # blank line or header
                if len(row) != 4:
                    raise BadParams(
                        f"{path}:{row_no}: expected 4 fields x,y,z,class_id, "
                        f"got {len(row)}")
                try:
                    x, y, z, c = (int(v) for v in row)
                except ValueError as exc:
                    raise BadParams(f"{path}:{row_no}: non-integer field: {exc}") from exc
                if c < 0:
                    raise BadParams(f"{path}:{row_no}: class_id must be >= 0, got {c}")
                if dims is not None:
                    nx, ny, nz = dims
                    if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
                        raise BadParams(
                            f"{path}:{row_no}: voxel ({x},{y},{z}) outside dims {dims}")
                coords.append((x, y, z))
                labels.append(c)
    except OSError as exc:
        raise IoFailure(f"cannot read labels file {path}: {exc}") from exc
    if not coords:
        # an annotation-free file is legal here; training later rejects it
        # as a set of empty classes
        return (np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.int64))
    return np.asarray(coords, dtype=np.int64), np.asarray(labels, dtype=np.int64)


def _is_int(token: str) -> bool:
    try:
        int(token)
    except ValueError:
        return False
    return True
