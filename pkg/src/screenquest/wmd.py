"""Word embeddings and word-mover distance between symptom phrases.

A phrase becomes a count-normalized distribution over its in-vocabulary
words; the distance between two phrases is the minimum cost of moving one
distribution onto the other, with ground costs given by distances between
word vectors. Phrases with no in-vocabulary words cannot be placed in the
metric space and get a sentinel distance instead.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from screenquest.symptoms import normalize_tokens
from screenquest.transport import TransportProblem, solve_transport

# fallback sentinel when a matrix has no finite off-diagonal entry to scale by
DEFAULT_SENTINEL = 1e6

GROUND_METRICS = ("euclidean", "cosine")


@dataclass
class EmbeddingStore:
    """Word -> vector lookup with a fixed dimensionality."""

    dim: int
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def __contains__(self, word: str) -> bool:
        return word in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def get(self, word: str) -> np.ndarray:
        return self.vectors[word]


def load_embeddings(path) -> EmbeddingStore:
    """Read a text embedding file: one line per word, 'word v1 v2 ... vd'.

    Keys are lowercased. A repeated word keeps the last vector and warns;
    a dimensionality change is an error naming the line; an empty file is
    an error.
    """
    store: EmbeddingStore | None = None
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.split()
            if not parts:
                continue
            word = parts[0].lower()
            try:
                vec = np.array([float(x) for x in parts[1:]], dtype=float)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad vector component: {exc}") from exc
            if len(vec) == 0:
                raise ValueError(f"{path}:{lineno}: no vector components for {word!r}")
            if store is None:
                store = EmbeddingStore(dim=len(vec))
            elif len(vec) != store.dim:
                raise ValueError(
                    f"{path}:{lineno}: vector for {word!r} has dimension "
                    f"{len(vec)}, expected {store.dim}"
                )
            if word in store.vectors:
                warnings.warn(f"duplicate vector for {word!r}; keeping the last one")
            store.vectors[word] = vec
    if store is None or len(store) == 0:
        raise ValueError(f"{path}: no vectors found")
    return store


def phrase_to_distribution(phrase: str, store: EmbeddingStore):
    """Normalized bag of in-vocabulary words for a phrase.

    Returns (words, weights) with weights proportional to token counts and
    summing to 1. Out-of-vocabulary tokens are dropped. A phrase with no
    in-vocabulary tokens returns two empty sequences, which downstream
    treats as "not placeable".
    """
    counts: dict[str, int] = {}
    for token in normalize_tokens(phrase):
        if token in store:
            counts[token] = counts.get(token, 0) + 1
    if not counts:
        return [], np.zeros(0)
    words = sorted(counts)
    weights = np.array([counts[w] for w in words], dtype=float)
    weights /= weights.sum()
    return words, weights


def ground_costs(
    words_a: list[str], words_b: list[str], store: EmbeddingStore, metric: str = "euclidean"
) -> np.ndarray:
    if metric not in GROUND_METRICS:
        raise ValueError(f"unknown ground metric {metric!r}")
    A = np.stack([store.get(w) for w in words_a])
    B = np.stack([store.get(w) for w in words_b])
    if metric == "euclidean":
        diff = A[:, None, :] - B[None, :, :]
        return np.sqrt((diff * diff).sum(axis=2))
    na = np.linalg.norm(A, axis=1)
    nb = np.linalg.norm(B, axis=1)
    denom = np.outer(na, nb)
    if (denom == 0).any():
        raise ValueError("cosine ground metric is undefined for zero vectors")
    return 1.0 - (A @ B.T) / denom


def wmd(
    phrase_a: str,
    phrase_b: str,
    store: EmbeddingStore,
    metric: str = "euclidean",
    sentinel: float = DEFAULT_SENTINEL,
) -> float:
    """Word-mover distance between two phrases.

    If either phrase has no in-vocabulary words the sentinel is returned
    (the phrase has no position in the embedding space). Identical word
    distributions short-circuit to exactly 0.
    """
    words_a, weights_a = phrase_to_distribution(phrase_a, store)
    words_b, weights_b = phrase_to_distribution(phrase_b, store)
    if not words_a or not words_b:
        return float(sentinel)
    if words_a == words_b and np.array_equal(weights_a, weights_b):
        return 0.0
    costs = ground_costs(words_a, words_b, store, metric)
    result = solve_transport(TransportProblem(weights_a, weights_b, costs))
    return result.cost


@dataclass
class DistanceMatrix:
    """Symmetric phrase-to-phrase distances with the sentinel used, if any."""

    labels: list[str]
    values: np.ndarray
    sentinel: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.labels), len(self.labels)):
            raise ValueError("distance matrix shape does not match labels")


def distance_matrix(
    phrases: list[str],
    store: EmbeddingStore,
    metric: str = "euclidean",
    sentinel: float | None = None,
) -> DistanceMatrix:
    """All-pairs word-mover distances.

    Each unordered pair is solved once and mirrored; the diagonal is zero.
    Phrases with no in-vocabulary words sit at a sentinel distance from
    everything else: the given value, or the largest finite distance in the
    rest of the matrix (falling back to 1e6 if nothing is finite).
    """
    n = len(phrases)
    dists = [phrase_to_distribution(p, store) for p in phrases]
    empty = [not words for words, _ in dists]
    if any(empty):
        bad = [phrases[i] for i in range(n) if empty[i]]
        warnings.warn(
            f"{len(bad)} phrase(s) have no in-vocabulary words and get the "
            f"sentinel distance: {', '.join(repr(b) for b in bad[:5])}"
        )
    values = np.zeros((n, n))
    finite_max = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            if empty[i] or empty[j]:
                values[i, j] = values[j, i] = math.nan
                continue
            words_a, weights_a = dists[i]
            words_b, weights_b = dists[j]
            if words_a == words_b and np.array_equal(weights_a, weights_b):
                d = 0.0
            else:
                costs = ground_costs(words_a, words_b, store, metric)
                d = solve_transport(TransportProblem(weights_a, weights_b, costs)).cost
            values[i, j] = values[j, i] = d
            finite_max = max(finite_max, d)
    used_sentinel: float | None = None
    if any(empty):
        if sentinel is not None:
            used_sentinel = float(sentinel)
        elif finite_max > 0.0:
            used_sentinel = finite_max
        else:
            used_sentinel = DEFAULT_SENTINEL
        values = np.where(np.isnan(values), used_sentinel, values)
    return DistanceMatrix(labels=list(phrases), values=values, sentinel=used_sentinel)


def write_distance_matrix(
    matrix: DistanceMatrix, path, header_comment: str | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header_comment:
            handle.write(f"# {header_comment}\n")
        handle.write("\t".join(["phrase"] + matrix.labels) + "\n")
        for label, row in zip(matrix.labels, matrix.values):
            cells = [label] + [repr(float(x)) for x in row]
            handle.write("\t".join(cells) + "\n")


def read_distance_matrix(path) -> DistanceMatrix:
    with open(path, encoding="utf-8") as handle:
        lines = (line for line in handle if not line.startswith("#"))
        header = next(lines).rstrip("\n").split("\t")
        labels = header[1:]
        rows = []
        row_labels = []
        for line in lines:
            cells = line.rstrip("\n").split("\t")
            row_labels.append(cells[0])
            rows.append([float(x) for x in cells[1:]])
    if row_labels != labels:
        raise ValueError(f"{path}: row and column labels disagree")
    return DistanceMatrix(labels=labels, values=np.array(rows))
