"""A small CART decision tree (Gini impurity, axis-aligned numeric splits)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import CategoricalLabels

TREE_FORMAT = "biasamp-tree"
TREE_VERSION = 1


@dataclass(frozen=True)
class FeatureMatrix:
    rows: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError("feature matrix must be two-dimensional")
        if not np.all(np.isfinite(rows)):
            raise ValueError("feature matrix contains non-finite values")
        names = tuple(self.names) or tuple(f"x{i}" for i in range(rows.shape[1]))
        if len(names) != rows.shape[1]:
            raise ValueError("one name per feature column required")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "names", names)

    @property
    def n_features(self) -> int:
        return self.rows.shape[1]

    def __len__(self):
        return self.rows.shape[0]


@dataclass
class TreeNode:
    distribution: np.ndarray
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def label(self) -> int:
        return int(np.argmax(self.distribution))

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def to_json(self, n_features: int) -> str:
        nodes = []

        def visit(node):
            idx = len(nodes)
            entry = {"id": idx, "distribution": [float(p) for p in node.distribution]}
            nodes.append(entry)
            if not node.is_leaf:
                entry["feature"] = node.feature
                entry["threshold"] = node.threshold
                entry["left"] = visit(node.left)
                entry["right"] = visit(node.right)
            return idx

        visit(self)
        doc = {
            "format": TREE_FORMAT,
            "version": TREE_VERSION,
            "n_features": n_features,
            "n_classes": int(self.distribution.size),
            "nodes": nodes,
        }
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TreeNode":
        doc = json.loads(text)
        if doc.get("format") != TREE_FORMAT or doc.get("version") != TREE_VERSION:
            raise ValueError("unsupported tree document")
        nodes = doc["nodes"]

        def build(idx):
            entry = nodes[idx]
            node = cls(np.asarray(entry["distribution"], dtype=np.float64))
            if "feature" in entry:
                node.feature = int(entry["feature"])
                node.threshold = float(entry["threshold"])
                node.left = build(entry["left"])
                node.right = build(entry["right"])
            return node

        return build(0)


def gini(counts: np.ndarray) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return float(1.0 - np.sum(p * p))


def _best_split(x: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """Lowest weighted-Gini split as (score, feature, threshold, mask) or None.

    ``score`` is the size-weighted child impurity sum, n_l*G_l + n_r*G_r.
    """
    n = y.size
    best = None
    for feature in range(x.shape[1]):
        col = x[:, feature]
        order = np.argsort(col, kind="stable")
        xs = col[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y[order]] = 1.0
        left = np.cumsum(onehot, axis=0)[:-1]
        right = onehot.sum(axis=0) - left
        n_left = np.arange(1, n, dtype=np.float64)
        n_right = n - n_left
        # Only boundaries between distinct values are candidate thresholds.
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
        if not np.any(valid):
            continue
        score = (n_left - (left * left).sum(axis=1) / n_left) + (
            n_right - (right * right).sum(axis=1) / n_right
        )
        score = np.where(valid, score, np.inf)
        pos = int(np.argmin(score))  # first minimum -> lowest threshold
        candidate = float(score[pos])
        if best is None or candidate < best[0]:
            threshold = float((xs[pos] + xs[pos + 1]) / 2.0)
            best = (candidate, feature, threshold)
    if best is None:
        return None
    score, feature, threshold = best
    return score, feature, threshold, x[:, feature] <= threshold


def train_tree(
    x: FeatureMatrix,
    y: CategoricalLabels,
    max_depth: Optional[int] = 5,
    min_leaf: int = 8,
) -> TreeNode:
    """Greedy CART growth. ``max_depth=None`` grows until nodes are pure or too small."""
    if len(x) == 0:
        raise ValueError("cannot train on an empty dataset")
    if len(x) != len(y):
        raise ValueError("features and labels have different lengths")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if len(x) < min_leaf:
        raise ValueError("fewer instances than min_leaf")
    n_classes = y.cardinality

    def grow(idx: np.ndarray, depth: int) -> TreeNode:
        labels = y.codes[idx]
        counts = np.bincount(labels, minlength=n_classes).astype(np.float64)
        node = TreeNode(counts / counts.sum())
        if max_depth is not None and depth >= max_depth:
            return node
        if np.count_nonzero(counts) <= 1 or idx.size < 2 * min_leaf:
            return node
        found = _best_split(x.rows[idx], labels, n_classes, min_leaf)
        if found is None:
            return node
        score, feature, threshold, mask = found
        parent = idx.size - float((counts * counts).sum()) / idx.size
        if not score < parent:
            return node
        node.feature, node.threshold = feature, threshold
        node.left = grow(idx[mask], depth + 1)
        node.right = grow(idx[~mask], depth + 1)
        return node

    return grow(np.arange(len(y)), 0)


def tree_predict(tree: TreeNode, x: FeatureMatrix, n_features: Optional[int] = None) -> CategoricalLabels:
    """Majority class of the leaf each row falls into."""
    if n_features is not None and x.n_features != n_features:
        raise ValueError(f"expected {n_features} features, got {x.n_features}")
    out = np.empty(len(x), dtype=np.int64)
    stack = [(tree, np.arange(len(x)))]
    while stack:
        node, idx = stack.pop()
        if idx.size == 0:
            continue
        if node.is_leaf:
            out[idx] = node.label
            continue
        if node.feature >= x.n_features:
            raise ValueError("feature index beyond matrix width")
        go_left = x.rows[idx, node.feature] <= node.threshold
        stack.append((node.left, idx[go_left]))
        stack.append((node.right, idx[~go_left]))
    return CategoricalLabels(out, tree.distribution.size)


class DecisionTree:
    """Thin estimator wrapper remembering the feature count."""

    def __init__(self, max_depth: Optional[int] = 5, min_leaf: int = 8):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.root: Optional[TreeNode] = None
        self.n_features: Optional[int] = None

    def fit(self, x: FeatureMatrix, y: CategoricalLabels) -> "DecisionTree":
        self.root = train_tree(x, y, self.max_depth, self.min_leaf)
        self.n_features = x.n_features
        return self

    def predict(self, x: FeatureMatrix) -> CategoricalLabels:
        if self.root is None:
            raise RuntimeError("tree is not fitted")
        return tree_predict(self.root, x, self.n_features)

    def to_json(self) -> str:
        return self.root.to_json(self.n_features)


def as_features(rows: Sequence, names: Sequence[str] = ()) -> FeatureMatrix:
    return FeatureMatrix(np.asarray(rows, dtype=np.float64), tuple(names))
