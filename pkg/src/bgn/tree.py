"""Depth-limited CART regression tree (squared error, exhaustive best split).

Used as the interpretability baseline. Thresholds are midpoints between
consecutive distinct feature values; ``x[feature] <= threshold`` goes left.
Features are scanned in column order and thresholds in increasing order; a
later candidate replaces the incumbent only if strictly better.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from bgn.errors import DimensionError


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 3
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass
class TreeNode:
    prediction: float
    count: int
    feature: int | None = None
    threshold: float | None = None
    left: TreeNode | None = None
    right: TreeNode | None = None

    @property
    def is_leaf(self):
        return self.feature is None

    def depth(self):
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())

    def leaves(self):
        if self.is_leaf:
            return [self]
        return self.left.leaves() + self.right.leaves()

    def used_features(self):
        if self.is_leaf:
            return set()
        return {self.feature} | self.left.used_features() | self.right.used_features()


def _sse(y):
    c = y - y.mean()
    return float(c @ c)


def best_split(X, y, min_leaf):
    """(feature, threshold, children SSE) of the best split, or None."""
    m, d = X.shape
    best = None
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order] - y.mean()
        cuts = np.flatnonzero(xs[1:] > xs[:-1])
        n_left = cuts + 1
        keep = (n_left >= min_leaf) & (m - n_left >= min_leaf)
        cuts = cuts[keep]
        if cuts.size == 0:
            continue
        cs = np.cumsum(ys)
        cs2 = np.cumsum(ys * ys)
        nl = (cuts + 1).astype(float)
        nr = m - nl
        sl, sl2 = cs[cuts], cs2[cuts]
        sse = (sl2 - sl * sl / nl) + ((cs2[-1] - sl2) - (cs[-1] - sl) ** 2 / nr)
        i = int(np.argmin(sse))
        if best is None or sse[i] < best[2]:
            k = cuts[i]
            best = (f, float((xs[k] + xs[k + 1]) / 2.0), float(sse[i]))
    return best


def _grow(X, y, depth, config):
    node = TreeNode(prediction=float(y.mean()), count=int(y.shape[0]))
    if depth >= config.max_depth or y.shape[0] < 2 * config.min_samples_leaf:
        return node
    parent = _sse(y)
    if parent == 0.0:
        return node
    found = best_split(X, y, config.min_samples_leaf)
    if found is None:
        return node
    f, thr, child = found
    if not child < parent - 1e-12 * parent:
        return node
    go_left = X[:, f] <= thr
    if go_left.all() or not go_left.any():
        return node
    node.feature, node.threshold = f, thr
    node.left = _grow(X[go_left], y[go_left], depth + 1, config)
    node.right = _grow(X[~go_left], y[~go_left], depth + 1, config)
    return node


def fit_tree(train, config=TreeConfig()):
    """Fit on the raw (original-unit) features of ``train``."""
    X = np.asarray(train.raw_features(), dtype=float)
    y = np.asarray(train.labels, dtype=float)
    if y.shape[0] < 1:
        raise ValueError("cannot fit a tree on an empty dataset")
    return _grow(X, y, 0, config)


def predict_tree(tree, x):
    x = np.asarray(x, dtype=float)
    X = np.atleast_2d(x)
    out = np.empty(X.shape[0])
    for i, row in enumerate(X):
        node = tree
        while not node.is_leaf:
            if node.feature >= row.shape[0]:
                raise DimensionError(f"tree splits on feature {node.feature}, input has {row.shape[0]}")
            node = node.left if row[node.feature] <= node.threshold else node.right
        out[i] = node.prediction
    return float(out[0]) if x.ndim == 1 else out


def render_tree(tree, feature_names, precision=6):
    lines = []

    def walk(node, indent):
        pad = "  " * indent
        if node.is_leaf:
            lines.append(f"{pad}predict {node.prediction:.{precision}g}  (n={node.count})")
            return
        name = feature_names[node.feature]
        lines.append(f"{pad}if {name} <= {node.threshold:.{precision}g}:  (n={node.count})")
        walk(node.left, indent + 1)
        lines.append(f"{pad}else:  # {name} > {node.threshold:.{precision}g}")
        walk(node.right, indent + 1)

    walk(tree, 0)
    return "\n".join(lines)
