"""CART regression tree with deterministic tie-breaking."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional

import numpy as np

MIN_LEAF = 5
MAX_DEPTH = 20
SOH_STEP = 0.001


@dataclass(frozen=True)
class Node:
    value: float  # mean label of the samples reaching this node
    n: int
    feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["Node"] = None  # x[feature] <= threshold
    right: Optional["Node"] = None

    @property
    def is_leaf(self):
        return self.feature is None

    def to_dict(self):
        d = {"value": self.value, "n": self.n}
        if not self.is_leaf:
            d.update(feature=self.feature, threshold=self.threshold,
                     left=self.left.to_dict(), right=self.right.to_dict())
        return d

    @classmethod
    def from_dict(cls, d):
        if "feature" not in d:
            return cls(float(d["value"]), int(d["n"]))
        return cls(float(d["value"]), int(d["n"]), int(d["feature"]), float(d["threshold"]),
                   cls.from_dict(d["left"]), cls.from_dict(d["right"]))


@dataclass(frozen=True)
class RegressionTree:
    root: Node
    n_features: int
    min_leaf: int = MIN_LEAF
    max_depth: int = MAX_DEPTH

    def depth(self, node=None):
        node = node or self.root
        return 0 if node.is_leaf else 1 + max(self.depth(node.left), self.depth(node.right))

    def leaves(self):
        stack, out = [self.root], []
        while stack:
            nd = stack.pop()
            if nd.is_leaf:
                out.append(nd)
            else:
                stack += [nd.right, nd.left]
        return out

    def to_dict(self):
        return {"n_features": self.n_features, "min_leaf": self.min_leaf,
                "max_depth": self.max_depth, "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, d):
        return cls(Node.from_dict(d["root"]), int(d["n_features"]), int(d["min_leaf"]), int(d["max_depth"]))


def _best_split(X, y, min_leaf):
    """Return ``(gain, feature, threshold)`` of the best split or None."""
    n = len(y)
    yc = y - y.mean()
    parent = float(yc @ yc)
    best = None
    tol = 1e-12 * max(parent, 1e-300)
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], yc[order]
        cs = np.cumsum(ys)
        cs2 = np.cumsum(ys * ys)
        i = np.arange(min_leaf, n - min_leaf + 1)
        if len(i) == 0:
            continue
        valid = xs[i - 1] < xs[i]
        if not valid.any():
            continue
        i = i[valid]
        sl, sl2 = cs[i - 1], cs2[i - 1]
        sr, sr2 = cs[-1] - sl, cs2[-1] - sl2
        sse = (sl2 - sl * sl / i) + (sr2 - sr * sr / (n - i))
        gains = parent - sse
        # first maximum gives the lowest threshold for this feature
        k = int(np.argmax(gains))
        g = float(gains[k])
        if best is None or g > best[0] + tol:
            thr = 0.5 * (xs[i[k] - 1] + xs[i[k]])
            best = (g, j, float(thr))
    if best is None or best[0] <= tol:
        return None
    return best


def tree_train(features, labels, min_leaf: int = MIN_LEAF, max_depth: int = MAX_DEPTH) -> RegressionTree:
    """Grow a variance-reduction tree; leaves predict the mean label.

    Among equally good splits the lower feature index wins, then the lower
    threshold. Thresholds sit midway between adjacent distinct values.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != len(y):
        raise ValueError("features and labels differ in length")
    if min_leaf < 1:
        raise ValueError("min_leaf must be >= 1")
    if len(y) < 2 * min_leaf:
        raise ValueError(f"need at least {2 * min_leaf} samples, got {len(y)}")

    def grow(idx, depth):
        ys = y[idx]
        value = float(ys.mean())
        if depth >= max_depth or len(idx) < 2 * min_leaf or np.ptp(ys) == 0.0 or X.shape[1] == 0:
            return Node(value, len(idx))
        split = _best_split(X[idx], ys, min_leaf)
        if split is None:
            return Node(value, len(idx))
        _, j, thr = split
        go_left = X[idx, j] <= thr
        return Node(value, len(idx), j, thr, grow(idx[go_left], depth + 1), grow(idx[~go_left], depth + 1))

    return RegressionTree(grow(np.arange(len(y)), 0), X.shape[1], min_leaf, max_depth)


def quantize(value: float, step: float = SOH_STEP) -> float:
    """Round to a multiple of ``step``, halves away from zero."""
    if step <= 0:
        raise ValueError("step must be positive")
    q = Decimal(repr(float(value))) / Decimal(repr(float(step)))
    k = q.quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return float(k * Decimal(repr(float(step))))


def tree_predict(tree: RegressionTree, feature, soh_step: Optional[float] = SOH_STEP) -> float:
    x = np.asarray(feature, dtype=float).ravel()
    if len(x) != tree.n_features:
        raise ValueError(f"feature has {len(x)} dims, tree expects {tree.n_features}")
    node = tree.root
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node.value if soh_step is None else quantize(node.value, soh_step)
