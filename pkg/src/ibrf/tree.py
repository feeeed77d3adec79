"""CART classification tree for two classes, grown with Gini impurity."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

# decreases closer than this are ties, resolved toward the lower feature/threshold
TIE_TOL = 1e-12


@dataclass(frozen=True)
class SplitRule:
    feature_index: int
    threshold: float

    def goes_left(self, x) -> bool:
        return x[self.feature_index] <= self.threshold


def gini(class_counts) -> float:
    """Gini impurity ``1 - sum(p_c ** 2)`` of a pair of class counts."""
    a, b = class_counts
    if a < 0 or b < 0:
        raise ValueError(f"class counts must be non-negative, got {class_counts}")
    n = a + b
    if n == 0:
        raise ValueError("gini is undefined for an empty node")
    return 1.0 - (a * a + b * b) / (n * n)


def default_max_features(n_features: int) -> int:
    return max(1, int(math.isqrt(n_features)))


def _midpoint(lo: float, hi: float) -> float:
    mid = lo + (hi - lo) / 2.0
    # adjacent floats: the midpoint may round up onto hi
    return lo if mid >= hi else mid


def _best_threshold(col: np.ndarray, y: np.ndarray, n_pos: int, parent_score: float):
    """Best cut on one column: (decrease, threshold) or None.

    Scores use ``sum_c n_c^2 / n`` for each side, so the Gini decrease is
    ``(score_left + score_right - score_parent) / n``.
    """
    n = col.shape[0]
    order = np.argsort(col, kind="stable")
    v = col[order]
    cuts = np.flatnonzero(v[:-1] < v[1:])
    if cuts.size == 0:
        return None
    left_pos = np.cumsum(y[order])[cuts].astype(np.float64)
    n_left = (cuts + 1).astype(np.float64)
    n_right = n - n_left
    left_neg = n_left - left_pos
    right_pos = n_pos - left_pos
    right_neg = n_right - right_pos
    score = ((left_pos * left_pos + left_neg * left_neg) / n_left
             + (right_pos * right_pos + right_neg * right_neg) / n_right)
    decrease = (score - parent_score) / n
    best = decrease.max()
    i = int(np.flatnonzero(decrease >= best - TIE_TOL)[0])
    c = cuts[i]
    return float(decrease[i]), _midpoint(float(v[c]), float(v[c + 1]))


def best_split(X, y, candidate_features):
    """Split maximising the weighted Gini decrease over the candidate columns.

    Thresholds are midpoints of adjacent distinct values; ties go to the lower
    feature index, then the lower threshold. Returns ``(SplitRule, decrease)``
    or ``None`` when no split decreases impurity.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = y.shape[0]
    if n < 2:
        return None
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == n:
        return None
    parent_score = (n_pos * n_pos + (n - n_pos) ** 2) / n
    best = None
    for f in sorted(int(f) for f in candidate_features):
        found = _best_threshold(X[:, f], y, n_pos, parent_score)
        if found is None:
            continue
        dec, thr = found
        if best is None or dec > best[1] + TIE_TOL:
            best = (SplitRule(f, thr), dec)
    if best is None or best[1] <= TIE_TOL:
        return None
    return best


class DecisionTree:
    """Fitted tree stored as flat node arrays.

    Node 0 is the root. Leaves have ``feature == -1``; ``counts[node]`` holds
    the training class counts that reached each node.
    """

    def __init__(self, feature, threshold, left, right, counts, n_features,
                 max_features, training_seed=None):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.counts = np.asarray(counts, dtype=np.int64).reshape(-1, 2)
        self.n_features = int(n_features)
        self.max_features = int(max_features)
        self.training_seed = training_seed
        for a in (self.feature, self.threshold, self.left, self.right, self.counts):
            a.flags.writeable = False

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def depth(self) -> int:
        best, stack = 0, [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if not self.is_leaf(node):
                stack.extend([(self.left[node], d + 1), (self.right[node], d + 1)])
        return best

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(
                f"tree was trained on {self.n_features} features, got {X.shape[1]}"
            )
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        while rows.size:
            feat = self.feature[node[rows]]
            internal = feat >= 0
            rows, feat = rows[internal], feat[internal]
            if not rows.size:
                break
            current = node[rows]
            go_left = X[rows, feat] <= self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])
        return node

    def predict_proba(self, X) -> np.ndarray:
        counts = self.counts[self.apply(X)].astype(np.float64)
        return counts / counts.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        """Class code with the larger leaf count; ties go to code 1."""
        proba = self.predict_proba(X)
        return (proba[:, 1] >= proba[:, 0]).astype(np.int64)

    def structure(self) -> tuple:
        """Hashable snapshot used to compare trees for equality."""
        return (self.feature.tobytes(), self.threshold.tobytes(), self.left.tobytes(),
                self.right.tobytes(), self.counts.tobytes())

    def to_dict(self) -> dict:
        def node_dict(node):
            if self.is_leaf(node):
                return {"counts": [int(c) for c in self.counts[node]]}
            return {
                "feature": int(self.feature[node]),
                "threshold": float(self.threshold[node]),
                "counts": [int(c) for c in self.counts[node]],
                "left": node_dict(int(self.left[node])),
                "right": node_dict(int(self.right[node])),
            }

        return {
            "n_features": self.n_features,
            "max_features": self.max_features,
            "training_seed": self.training_seed,
            "root": node_dict(0),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DecisionTree":
        feature, threshold, left, right, counts = [], [], [], [], []

        def add(node):
            i = len(feature)
            feature.append(node.get("feature", -1))
            threshold.append(node.get("threshold", 0.0))
            left.append(-1)
            right.append(-1)
            counts.append(node["counts"])
            if "left" in node:
                left[i] = add(node["left"])
                right[i] = add(node["right"])
            return i

        add(doc["root"])
        return cls(feature, threshold, left, right, counts, doc["n_features"],
                   doc["max_features"], doc.get("training_seed"))


def fit_tree(data: Dataset, max_features: int | None = None, rng=None,
             training_seed=None) -> DecisionTree:
    """Grow an unpruned tree.

    At every node ``max_features`` distinct columns are drawn from ``rng`` and
    the best Gini split among them is taken. Growth stops at pure nodes, nodes
    with fewer than two samples, and nodes where no drawn column gives a
    positive decrease. There is no depth limit.
    """
    X, y = data.features, data.labels
    n_samples, n_features = X.shape
    if n_samples == 0:
        raise ValueError("cannot fit a tree on an empty dataset")
    if max_features is None:
        max_features = default_max_features(n_features)
    if not 1 <= max_features <= n_features:
        raise ValueError(f"max_features must be in [1, {n_features}], got {max_features}")
    if max_features < n_features and rng is None:
        raise ValueError("random feature subsets need a seeded generator")
    all_features = np.arange(n_features)

    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n_pos = int(y[idx].sum())
        counts.append((len(idx) - n_pos, n_pos))
        return len(feature) - 1

    root = new_node(np.arange(n_samples))
    stack = [(root, np.arange(n_samples))]
    while stack:
        node, idx = stack.pop()
        n_neg, n_pos = counts[node]
        if len(idx) < 2 or n_neg == 0 or n_pos == 0:
            continue
        if max_features == n_features:
            candidates = all_features
        else:
            candidates = rng.choice(n_features, size=max_features, replace=False)
        Xn = X[idx]
        found = best_split(Xn, y[idx], candidates)
        if found is None:
            continue
        rule, _ = found
        mask = Xn[:, rule.feature_index] <= rule.threshold
        feature[node] = rule.feature_index
        threshold[node] = rule.threshold
        left_idx, right_idx = idx[mask], idx[~mask]
        left[node] = new_node(left_idx)
        right[node] = new_node(right_idx)
        # right pushed first so the left subtree is grown (and draws) first
        stack.append((right[node], right_idx))
        stack.append((left[node], left_idx))
    return DecisionTree(feature, threshold, left, right, counts, n_features,
                        max_features, training_seed)


def predict_proba_tree(tree: DecisionTree, x) -> np.ndarray:
    """Class probabilities (by class code) of the leaf that ``x`` reaches."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("predict_proba_tree takes a single feature vector")
    return tree.predict_proba(x[None, :])[0]
