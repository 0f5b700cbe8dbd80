"""
CART classification tree grown with Gini impurity and random feature subspaces. Nodes are kept on
flat arrays, a node with `feature == LEAF` is a leaf.
"""
from logging import getLogger
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

logger = getLogger(__name__)

LEAF = -1


class SplitCandidate(NamedTuple):
    feature: int
    threshold: float
    gain: float


class SplitLog(NamedTuple):
    node: int
    candidates: Tuple[SplitCandidate, ...]  # Best split of every scored feature
    chosen: SplitCandidate


def gini(counts: np.ndarray) -> np.ndarray:
    """
    :param counts: `(..., n_classes)` class counts
    :return: Gini impurity over the last axis, 0 for empty sets
    """
    totals = counts.sum(axis=-1)
    with np.errstate(invalid='ignore', divide='ignore'):
        proportions = counts / np.maximum(totals, 1)[..., np.newaxis]
    return np.where(totals > 0, 1. - np.sum(proportions ** 2, axis=-1), 0.)


def best_split_for_feature(values: np.ndarray, labels: np.ndarray, n_classes: int,
                           parent_impurity: float) -> Optional[SplitCandidate]:
    """
    Score every midpoint between consecutive unique values. Samples go left when `x <= threshold`
    :return: Best candidate, smallest threshold on ties. `None` if the feature is constant
    """
    order = np.argsort(values, kind='stable')
    sorted_values = values[order]
    boundaries = np.flatnonzero(sorted_values[:-1] < sorted_values[1:])
    if boundaries.size == 0:
        return None

    n_samples = values.size
    cumulative = np.cumsum(np.eye(n_classes, dtype=np.int64)[labels[order]], axis=0)
    left = cumulative[boundaries]
    right = cumulative[-1] - left
    n_left = (boundaries + 1).astype(np.float64)
    n_right = n_samples - n_left
    children = (n_left * gini(left) + n_right * gini(right)) / n_samples
    gains = parent_impurity - children

    best = int(np.argmax(gains))  # First, so smallest threshold, on ties
    position = boundaries[best]
    low, high = sorted_values[position], sorted_values[position + 1]
    threshold = (low + high) / 2.
    if threshold >= high:  # Adjacent floats
        threshold = low
    return SplitCandidate(-1, float(threshold), float(gains[best]))


class DecisionTree:
    def __init__(self, feature: np.ndarray, threshold: np.ndarray, left: np.ndarray, right: np.ndarray,
                 counts: np.ndarray, split_logs: Optional[List[SplitLog]] = None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.counts = counts  # (n_nodes, n_classes) training samples reaching every node
        self.split_logs = split_logs or []

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_classes(self) -> int:
        return self.counts.shape[1]

    @property
    def n_leaves(self) -> int:
        return int(np.count_nonzero(self.feature == LEAF))

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    def leaf_class(self, node: int) -> int:
        return int(np.argmax(self.counts[node]))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """
        :return: Leaf index reached by every row of `X`
        """
        X = np.atleast_2d(X)
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[nodes] != LEAF
        while np.any(active):
            current = nodes[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            nodes[active] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[nodes] != LEAF
        return nodes

    def predict(self, X: np.ndarray) -> np.ndarray:
        """
        :return: Majority class of the leaf reached by every row, smallest index on ties
        """
        return np.argmax(self.counts[self.apply(X)], axis=1)

    def split_counts(self, n_features: int) -> np.ndarray:
        return np.bincount(self.feature[self.feature != LEAF], minlength=n_features)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'feature': self.feature.tolist(),
            'threshold': self.threshold.tolist(),
            'left': self.left.tolist(),
            'right': self.right.tolist(),
            'counts': self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DecisionTree':
        return cls(np.array(data['feature'], dtype=np.int64),
                   np.array(data['threshold'], dtype=np.float64),
                   np.array(data['left'], dtype=np.int64),
                   np.array(data['right'], dtype=np.int64),
                   np.array(data['counts'], dtype=np.int64))

    @classmethod
    def grow(cls, X: np.ndarray, y: np.ndarray, n_classes: int, max_features: int,
             rng: np.random.Generator, max_depth: Optional[int] = None, min_samples_split: int = 2,
             debug: bool = False) -> 'DecisionTree':
        """
        Grow a tree depth first. Every node draws a fresh subset of `max_features` features; when none
        of them can split the node the remaining features are tried in random order until one can
        :param X: `(n_samples, n_features)`
        :param y: class indices
        """
        n_features = X.shape[1]
        features: List[int] = []
        thresholds: List[float] = []
        lefts: List[int] = []
        rights: List[int] = []
        counts: List[np.ndarray] = []
        split_logs: List[SplitLog] = []

        def new_node(samples: np.ndarray) -> int:
            features.append(LEAF)
            thresholds.append(0.)
            lefts.append(LEAF)
            rights.append(LEAF)
            counts.append(np.bincount(y[samples], minlength=n_classes))
            return len(features) - 1

        stack = [(new_node(np.arange(y.size)), np.arange(y.size), 0)]
        while stack:
            node, samples, depth = stack.pop()
            node_counts = counts[node]
            if (samples.size < min_samples_split or np.count_nonzero(node_counts) <= 1
                    or (max_depth is not None and depth >= max_depth)):
                continue

            permutation = rng.permutation(n_features)
            parent_impurity = float(gini(node_counts.astype(np.float64)))
            candidates = []
            for feature in np.sort(permutation[:max_features]):
                candidate = best_split_for_feature(X[samples, feature], y[samples], n_classes, parent_impurity)
                if candidate is not None:
                    candidates.append(candidate._replace(feature=int(feature)))
            if not candidates:
                for feature in permutation[max_features:]:
                    candidate = best_split_for_feature(X[samples, feature], y[samples], n_classes,
                                                       parent_impurity)
                    if candidate is not None:
                        candidates.append(candidate._replace(feature=int(feature)))
                        break
            if not candidates:
                continue  # Every feature is constant on this node

            # Features ascending, so the first best is the smallest feature index
            chosen = max(candidates, key=lambda c: c.gain)
            if debug:
                split_logs.append(SplitLog(node, tuple(candidates), chosen))

            goes_left = X[samples, chosen.feature] <= chosen.threshold
            left_samples, right_samples = samples[goes_left], samples[~goes_left]
            features[node] = chosen.feature
            thresholds[node] = chosen.threshold
            lefts[node] = new_node(left_samples)
            rights[node] = new_node(right_samples)
            # Right pushed first so the left subtree gets the lower node ids
            stack.append((rights[node], right_samples, depth + 1))
            stack.append((lefts[node], left_samples, depth + 1))

        return cls(np.array(features, dtype=np.int64), np.array(thresholds, dtype=np.float64),
                   np.array(lefts, dtype=np.int64), np.array(rights, dtype=np.int64),
                   np.array(counts, dtype=np.int64), split_logs=split_logs)
