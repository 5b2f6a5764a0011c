"""Evaluation statistics: ROC AUC, Pearson correlation, Cohen's kappa.

These are the quantities reported for classifier quality, rater agreement,
and questionnaire validation. All are closed-form and hand-rolled so their
tie and degenerate-input behavior is pinned down by our own tests.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from screenquest.checks import as_float_array


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank-sum formulation.

    Ties between a positive and a negative score count half. Equivalent to
    the probability that a random positive outranks a random negative.

    Raises ValueError if only one class is present.
    """
    scores = as_float_array(scores, "scores")
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d and the same length")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both a positive and a negative example")
    ranks = _average_ranks(scores)
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the average of their rank block."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=float)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        # ranks i+1 .. j+1 share their average; the sum of a run of
        # consecutive integers is exact in floats at these sizes
        avg = (i + 1 + j + 1) / 2.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def pearson(x, y) -> float:
    """Pearson correlation coefficient.

    Raises ValueError on length mismatch, fewer than two points, or a
    constant input (undefined correlation).
    """
    x = as_float_array(x, "x")
    y = as_float_array(y, "y")
    if x.ndim != 1 or y.ndim != 1 or len(x) != len(y):
        raise ValueError("x and y must be 1-d and the same length")
    if len(x) < 2:
        raise ValueError("correlation needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt((dx * dx).sum()))
    sy = float(np.sqrt((dy * dy).sum()))
    if sx == 0.0 or sy == 0.0:
        raise ValueError("undefined correlation for constant input")
    return float((dx * dy).sum()) / (sx * sy)


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    """Cohen's kappa between two raters' categorical labels.

    kappa = (p_o - p_e) / (1 - p_e) with p_e from the raters' marginal
    category frequencies. When p_e == 1 both raters are constant and equal,
    and kappa is 1.0 by convention.
    """
    a = list(a)
    b = list(b)
    if len(a) != len(b):
        raise ValueError("rating lists must be the same length")
    if not a:
        raise ValueError("rating lists are empty")
    n = len(a)
    cats = sorted(set(a) | set(b), key=repr)
    p_o = sum(1 for x, y in zip(a, b) if x == y) / n
    p_e = 0.0
    for c in cats:
        p_e += (a.count(c) / n) * (b.count(c) / n)
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


def intra_rater(pairs) -> float:
    """Reliability of one rater: correlation of first vs second scores.

    ``pairs`` holds (path_id, first_score, second_score) tuples from the
    duplicated sheet items. Pairs where either showing is not a number
    (a not-enough-information response) are dropped. Raises ValueError if
    fewer than two usable pairs remain.
    """
    firsts: list[float] = []
    seconds: list[float] = []
    for _path_id, first, second in pairs:
        if _is_number(first) and _is_number(second):
            firsts.append(float(first))
            seconds.append(float(second))
    if len(firsts) < 2:
        raise ValueError(
            f"reliability needs at least two usable pairs, got {len(firsts)}"
        )
    return pearson(firsts, seconds)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)
