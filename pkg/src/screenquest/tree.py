"""Depth-limited binary decision trees over yes/no features.

The tree asks binary questions (feature == 1?) and each leaf reports the
raw fraction of condition users among the training rows that reached it.
Splits greedily maximize the Gini impurity decrease; ties, including the
zero-gain case, go to the lowest feature index that still separates the
rows, so a node only becomes a leaf when it is pure, out of depth, or no
feature varies within the min_leaf bounds. That guarantees two distinct
rows with different labels never share a leaf when depth allows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from screenquest.checks import check_binary_labels, check_binary_matrix
from screenquest.metrics import auc

DEFAULT_MAX_DEPTH = 6


@dataclass
class TreeNode:
    n_condition: int
    n_control: int
    feature: int | None = None
    yes: "TreeNode | None" = None
    no: "TreeNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature is None

    @property
    def probability(self) -> float:
        """Raw fraction of condition users among training rows at this node."""
        return self.n_condition / (self.n_condition + self.n_control)

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.yes.depth(), self.no.depth())

    def leaves(self) -> list["TreeNode"]:
        if self.is_leaf:
            return [self]
        return self.yes.leaves() + self.no.leaves()


def gini(n_pos: int, n_neg: int) -> float:
    n = n_pos + n_neg
    if n == 0:
        return 0.0
    p = n_pos / n
    q = n_neg / n
    return 1.0 - p * p - q * q


def split_gain(y, mask) -> float:
    """Gini impurity decrease of splitting rows by a boolean mask."""
    y = np.asarray(y)
    mask = np.asarray(mask, dtype=bool)
    n = len(y)
    pos = int((y == 1).sum())
    yes_pos = int((y[mask] == 1).sum())
    yes_n = int(mask.sum())
    no_pos = pos - yes_pos
    no_n = n - yes_n
    parent = gini(pos, n - pos)
    weighted = (yes_n / n) * gini(yes_pos, yes_n - yes_pos) + (no_n / n) * gini(
        no_pos, no_n - no_pos
    )
    return parent - weighted


class ScreeningTreeClassifier(BaseEstimator, ClassifierMixin):
    """Greedy Gini decision tree for binary features and binary labels.

    Parameters
    ----------
    max_depth : maximum number of questions along any path (default 6).
    min_leaf : minimum training rows in each child of a split (default 1).
    """

    def __init__(self, max_depth: int = DEFAULT_MAX_DEPTH, min_leaf: int = 1):
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X = check_binary_matrix(X)
        y = check_binary_labels(y, X.shape[0])
        if X.shape[0] == 0:
            raise ValueError("cannot fit on an empty dataset")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[1]
        if len(np.unique(y)) < 2:
            warnings.warn("training labels are single-class; tree is one leaf")
        self.root_ = _grow(
            X.astype(np.int64), y.astype(np.int64), np.arange(X.shape[0]),
            depth=0, max_depth=self.max_depth, min_leaf=self.min_leaf,
        )
        return self

    def predict_proba(self, X) -> np.ndarray:
        root = self._fitted_root()
        X = check_binary_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        p1 = np.empty(X.shape[0])
        _route(root, X, np.arange(X.shape[0]), p1)
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def _fitted_root(self) -> TreeNode:
        if not hasattr(self, "root_"):
            raise ValueError("ScreeningTreeClassifier is not fitted")
        return self.root_


def _grow(X, y, idx, depth, max_depth, min_leaf) -> TreeNode:
    pos = int(y[idx].sum())
    neg = len(idx) - pos
    node = TreeNode(n_condition=pos, n_control=neg)
    if pos == 0 or neg == 0 or depth >= max_depth:
        return node
    feature = _best_split(X, y, idx, min_leaf)
    if feature is None:
        return node
    mask = X[idx, feature] == 1
    node.feature = feature
    node.yes = _grow(X, y, idx[mask], depth + 1, max_depth, min_leaf)
    node.no = _grow(X, y, idx[~mask], depth + 1, max_depth, min_leaf)
    return node


def _best_split(X, y, idx, min_leaf):
    """Feature with the largest Gini gain; ties to the lowest index.

    For fixed parent counts, maximizing the gain is the same as maximizing
    (yes_pos^2 + yes_neg^2)/yes_n + (no_pos^2 + no_neg^2)/no_n. That score
    is computed in floats for speed and near-ties are re-compared exactly
    as rationals so tie-breaking is not at the mercy of rounding.
    """
    rows = X[idx]
    labels = y[idx]
    n = len(idx)
    pos = int(labels.sum())
    yes_n = rows.sum(axis=0)
    yes_pos = (rows * labels[:, None]).sum(axis=0)
    no_n = n - yes_n
    no_pos = pos - yes_pos
    yes_neg = yes_n - yes_pos
    no_neg = no_n - no_pos
    valid = (yes_n >= min_leaf) & (no_n >= min_leaf)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = (yes_pos**2 + yes_neg**2) / yes_n + (no_pos**2 + no_neg**2) / no_n
    score = np.where(valid, score, -np.inf)
    best = float(score.max())
    near = np.nonzero(score >= best - 1e-9 * max(1.0, abs(best)))[0]
    if len(near) == 1:
        return int(near[0])
    exact = {
        int(f): Fraction(int(yes_pos[f] ** 2 + yes_neg[f] ** 2), int(yes_n[f]))
        + Fraction(int(no_pos[f] ** 2 + no_neg[f] ** 2), int(no_n[f]))
        for f in near
    }
    top = max(exact.values())
    return min(f for f, s in exact.items() if s == top)


def _route(node: TreeNode, X, idx, out) -> None:
    if node.is_leaf:
        out[idx] = node.probability
        return
    mask = X[idx, node.feature] == 1
    _route(node.yes, X, idx[mask], out)
    _route(node.no, X, idx[~mask], out)


@dataclass
class TreePath:
    """One root-to-leaf path: the questions asked and the leaf estimate."""

    steps: list[tuple[int, bool]]
    n_condition: int
    n_control: int

    @property
    def probability(self) -> float:
        return self.n_condition / (self.n_condition + self.n_control)


def export_paths(root: TreeNode) -> list[TreePath]:
    """All root-to-leaf paths in preorder (yes branch first)."""
    paths: list[TreePath] = []

    def walk(node: TreeNode, steps: list[tuple[int, bool]]) -> None:
        if node.is_leaf:
            paths.append(TreePath(list(steps), node.n_condition, node.n_control))
            return
        walk(node.yes, steps + [(node.feature, True)])
        walk(node.no, steps + [(node.feature, False)])

    walk(root, [])
    return paths


def loocv_scores(X, y, max_depth: int = DEFAULT_MAX_DEPTH, min_leaf: int = 1) -> np.ndarray:
    """Leave-one-out score for each row: P(condition) from a tree fit on the rest.

    A fold whose training labels collapse to one class is scored with that
    class prior (the single-leaf tree does exactly that); a warning reports
    how many folds degenerated.
    """
    X = check_binary_matrix(X)
    y = check_binary_labels(y, X.shape[0])
    n = X.shape[0]
    if n < 2:
        raise ValueError("leave-one-out needs at least two rows")
    scores = np.empty(n)
    degenerate = 0
    Xi = X.astype(np.int64)
    yi = y.astype(np.int64)
    all_idx = np.arange(n)
    for i in range(n):
        train = np.delete(all_idx, i)
        fold_y = yi[train]
        if fold_y.min() == fold_y.max():
            degenerate += 1
        root = _grow(Xi, yi, train, 0, max_depth, min_leaf)
        _route(root, Xi, np.array([i]), scores)
    if degenerate:
        warnings.warn(
            f"{degenerate} leave-one-out fold(s) had single-class training "
            "labels and were scored with the class prior"
        )
    return scores


def loocv_auc(X, y, max_depth: int = DEFAULT_MAX_DEPTH, min_leaf: int = 1) -> float:
    """AUC of leave-one-out scores against the true labels."""
    return auc(loocv_scores(X, y, max_depth=max_depth, min_leaf=min_leaf), np.asarray(y))


def tree_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {
            "kind": "leaf",
            "n_condition": node.n_condition,
            "n_control": node.n_control,
        }
    return {
        "kind": "question",
        "feature": node.feature,
        "n_condition": node.n_condition,
        "n_control": node.n_control,
        "yes": tree_to_dict(node.yes),
        "no": tree_to_dict(node.no),
    }


def tree_from_dict(data: dict) -> TreeNode:
    if data["kind"] == "leaf":
        return TreeNode(n_condition=data["n_condition"], n_control=data["n_control"])
    return TreeNode(
        n_condition=data["n_condition"],
        n_control=data["n_control"],
        feature=data["feature"],
        yes=tree_from_dict(data["yes"]),
        no=tree_from_dict(data["no"]),
    )
