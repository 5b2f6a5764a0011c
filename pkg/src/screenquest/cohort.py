"""Condition-cohort identification and control-group assembly.

Cohort side: users who posted in the condition subreddits are featurized
(bag of words over those posts, an external-link flag, and activity
counts) and a shallow decision tree trained on hand-labeled examples
separates genuine self-reports from other mentions.

Control side: users who never posted in the condition subreddits but
asked about one of the cohort's most common symptoms in the medical
advice subreddit, with a minimum of activity to profile.
"""

from __future__ import annotations

import csv
import re
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from screenquest.corpus import UserRecord, word_count
from screenquest.symptoms import SymptomLexicon, match_symptoms, normalize_tokens
from screenquest.tree import ScreeningTreeClassifier, loocv_scores
from screenquest.metrics import auc

URL_PATTERN = re.compile(r"https?://", re.IGNORECASE)

VOCABULARY_SIZE = 500
DEFAULT_THRESHOLD = 0.5
CONTROL_MIN_POSTS = 2
CONTROL_TOP_SYMPTOMS = 3
MEDICAL_SUBREDDIT = "AskDocs"

COUNT_FEATURES = ("n_submissions", "n_comments", "n_replies", "n_words")


def load_stopwords() -> frozenset[str]:
    text = resources.files("screenquest.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def build_vocabulary(
    texts: Iterable[str],
    size: int = VOCABULARY_SIZE,
    stopwords: frozenset[str] | None = None,
) -> list[str]:
    """Most document-frequent tokens across texts, stopwords removed.

    Ties break lexicographically so the vocabulary is stable.
    """
    if stopwords is None:
        stopwords = load_stopwords()
    df: dict[str, int] = {}
    for text in texts:
        for token in set(normalize_tokens(text)):
            if token not in stopwords:
                df[token] = df.get(token, 0) + 1
    ranked = sorted(df, key=lambda t: (-df[t], t))
    return ranked[:size]


@dataclass
class CohortFeatures:
    """Raw per-user attributes before binarization."""

    author: str
    bow: np.ndarray  # binary, aligned with the vocabulary
    has_external_link: bool
    n_submissions: int
    n_comments: int
    n_replies: int
    n_words: int


def extract_features(
    user: UserRecord, vocab: Sequence[str], condition_subreddits
) -> CohortFeatures:
    """Featurize one condition-subreddit poster.

    The bag of words and the link flag look only at the user's posts in the
    condition subreddits (that is where a self-report would be); the
    activity counts cover everything the user wrote.
    """
    subs = set(condition_subreddits)
    cond_posts = [p for p in user.posts if p.subreddit in subs]
    index = {t: i for i, t in enumerate(vocab)}
    bow = np.zeros(len(vocab), dtype=np.int8)
    has_link = False
    for post in cond_posts:
        for token in normalize_tokens(post.text):
            col = index.get(token)
            if col is not None:
                bow[col] = 1
        if URL_PATTERN.search(post.text):
            has_link = True
    return CohortFeatures(
        author=user.author,
        bow=bow,
        has_external_link=has_link,
        n_submissions=sum(1 for p in user.posts if p.kind == "submission"),
        n_comments=sum(1 for p in user.posts if p.kind == "comment"),
        n_replies=user.replies_received,
        n_words=sum(word_count(p.text) for p in user.posts),
    )


def _count_vector(features: CohortFeatures) -> np.ndarray:
    return np.array(
        [features.n_submissions, features.n_comments, features.n_replies, features.n_words],
        dtype=float,
    )


def _to_matrix(
    features: Sequence[CohortFeatures], medians: np.ndarray
) -> np.ndarray:
    """Binary design matrix: bag of words, link flag, counts above median."""
    rows = []
    for f in features:
        counts = (_count_vector(f) > medians).astype(np.int8)
        rows.append(
            np.concatenate([f.bow, [np.int8(f.has_external_link)], counts])
        )
    return np.array(rows, dtype=np.int8)


@dataclass
class SelfReportModel:
    """A trained self-report classifier plus everything needed to apply it."""

    tree: ScreeningTreeClassifier
    vocab: list[str]
    medians: np.ndarray
    train_scores: np.ndarray  # leave-one-out P(condition) per training user
    train_labels: np.ndarray
    loocv_auc: float

    @property
    def feature_names(self) -> list[str]:
        return list(self.vocab) + ["has_external_link"] + list(COUNT_FEATURES)

    def matrix(self, features: Sequence[CohortFeatures]) -> np.ndarray:
        return _to_matrix(features, self.medians)

    def score(self, features: Sequence[CohortFeatures]) -> np.ndarray:
        """P(genuine self-report) per user."""
        if not features:
            return np.zeros(0)
        return self.tree.predict_proba(self.matrix(features))[:, 1]

    def rates_at(self, threshold: float) -> tuple[float, float]:
        """(true positive rate, false positive rate) of the leave-one-out
        scores at a threshold; score >= threshold counts as positive."""
        positive = self.train_scores >= threshold
        pos = self.train_labels == 1
        neg = ~pos
        tpr = float(positive[pos].mean()) if pos.any() else float("nan")
        fpr = float(positive[neg].mean()) if neg.any() else float("nan")
        return tpr, fpr


def train_selfreport_classifier(
    labeled: Sequence[tuple[CohortFeatures, bool]],
    vocab: Sequence[str],
    max_depth: int = 6,
    min_leaf: int = 1,
) -> SelfReportModel:
    """Fit the self-report tree on hand-labeled users.

    Count features are binarized at the training medians. Raises on fewer
    than two users in either class (degenerate labels); reports
    leave-one-out AUC alongside the fitted model.
    """
    if not labeled:
        raise ValueError("no labeled users")
    features = [f for f, _ in labeled]
    y = np.array([1 if lab else 0 for _, lab in labeled], dtype=np.int8)
    if (y == 1).sum() < 2 or (y == 0).sum() < 2:
        raise ValueError(
            "degenerate labels: need at least two users in each class, got "
            f"{int((y == 1).sum())} positive / {int((y == 0).sum())} negative"
        )
    medians = np.median(np.array([_count_vector(f) for f in features]), axis=0)
    X = _to_matrix(features, medians)
    tree = ScreeningTreeClassifier(max_depth=max_depth, min_leaf=min_leaf).fit(X, y)
    scores = loocv_scores(X, y, max_depth=max_depth, min_leaf=min_leaf)
    return SelfReportModel(
        tree=tree,
        vocab=list(vocab),
        medians=medians,
        train_scores=scores,
        train_labels=y.astype(int),
        loocv_auc=auc(scores, y),
    )


class CohortFeaturizer(BaseEstimator, TransformerMixin):
    """Estimator wrapper: UserRecords in, binary design matrix out.

    fit() builds the vocabulary from the users' condition-subreddit posts
    and freezes the count medians; transform() applies both.
    """

    def __init__(
        self,
        condition_subreddits: tuple[str, ...] = (),
        vocab_size: int = VOCABULARY_SIZE,
        stopwords: frozenset[str] | None = None,
    ):
        self.condition_subreddits = condition_subreddits
        self.vocab_size = vocab_size
        self.stopwords = stopwords

    def fit(self, X: Sequence[UserRecord], y=None):
        subs = set(self.condition_subreddits)
        texts = [
            "\n".join(p.text for p in user.posts if p.subreddit in subs) for user in X
        ]
        self.vocab_ = build_vocabulary(texts, self.vocab_size, self.stopwords)
        feats = [extract_features(u, self.vocab_, self.condition_subreddits) for u in X]
        self.medians_ = np.median(np.array([_count_vector(f) for f in feats]), axis=0)
        self.n_features_in_ = 1
        return self

    def transform(self, X: Sequence[UserRecord]) -> np.ndarray:
        if not hasattr(self, "vocab_"):
            raise ValueError("CohortFeaturizer is not fitted")
        feats = [extract_features(u, self.vocab_, self.condition_subreddits) for u in X]
        return _to_matrix(feats, self.medians_)

    def get_feature_names_out(self, input_features=None):
        return np.asarray(
            list(self.vocab_) + ["has_external_link"] + list(COUNT_FEATURES),
            dtype=object,
        )


CONDITION_LABEL = "condition"
CANDIDATE_LABEL = "control-candidate"


@dataclass
class CohortLabeling:
    """Classifier verdict for every scored user."""

    labels: dict[str, str]
    scores: dict[str, float]
    threshold: float
    true_positive_rate: float
    false_positive_rate: float

    @property
    def condition_users(self) -> list[str]:
        return sorted(a for a, l in self.labels.items() if l == CONDITION_LABEL)


def label_cohort(
    model: SelfReportModel,
    features: Sequence[CohortFeatures],
    threshold: float = DEFAULT_THRESHOLD,
) -> CohortLabeling:
    """Apply the classifier to every candidate; score >= threshold is in."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    scores = model.score(features)
    labels = {
        f.author: (CONDITION_LABEL if s >= threshold else CANDIDATE_LABEL)
        for f, s in zip(features, scores)
    }
    tpr, fpr = model.rates_at(threshold)
    return CohortLabeling(
        labels=labels,
        scores={f.author: float(s) for f, s in zip(features, scores)},
        threshold=threshold,
        true_positive_rate=tpr,
        false_positive_rate=fpr,
    )


def select_controls(
    users: Mapping[str, UserRecord],
    lexicon: SymptomLexicon,
    target_symptoms: Sequence[str],
    relevant_subreddits: Sequence[str],
    condition_subreddits: Sequence[str],
    medical_subreddit: str = MEDICAL_SUBREDDIT,
    min_posts: int = CONTROL_MIN_POSTS,
    min_words: int = 80,
) -> list[str]:
    """Pick control users for the cohort.

    A control mentioned one of the target symptoms in the medical advice
    subreddit, never posted in a condition subreddit, has at least
    ``min_posts`` posts, and wrote at least ``min_words`` words across the
    relevant subreddits (so there is enough text to profile them).
    Returns sorted author names.
    """
    targets = set(target_symptoms)
    condition = set(condition_subreddits)
    relevant = set(relevant_subreddits)
    selected: list[str] = []
    for author in sorted(users):
        user = users[author]
        if any(p.subreddit in condition for p in user.posts):
            continue
        if len(user.posts) < min_posts:
            continue
        relevant_words = sum(
            word_count(p.text) for p in user.posts if p.subreddit in relevant
        )
        if relevant_words < min_words:
            continue
        mentioned = False
        for post in user.posts:
            if post.subreddit != medical_subreddit:
                continue
            if match_symptoms(post.text, lexicon) & targets:
                mentioned = True
                break
        if mentioned:
            selected.append(author)
    return selected


@dataclass(frozen=True)
class LabelRecord:
    author: str
    label: int
    labeler: str


def load_labels(path) -> list[LabelRecord]:
    """Read hand labels: TSV with columns author, label (0/1), labeler."""
    records: list[LabelRecord] = []
    with open(path, encoding="utf-8") as handle:
        lines = (line for line in handle if not line.startswith("#"))
        reader = csv.DictReader(lines, delimiter="\t")
        required = {"author", "label", "labeler"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected columns author, label, labeler")
        for rec in reader:
            label = rec["label"].strip()
            if label not in ("0", "1"):
                raise ValueError(f"{path}: label must be 0 or 1, got {label!r}")
            records.append(LabelRecord(rec["author"], int(label), rec["labeler"]))
    return records


def training_labels(records: Sequence[LabelRecord]) -> dict[str, int]:
    """One label per author; for dual-labeled authors the first row wins."""
    out: dict[str, int] = {}
    disagreements = 0
    for rec in records:
        if rec.author in out:
            if out[rec.author] != rec.label:
                disagreements += 1
            continue
        out[rec.author] = rec.label
    if disagreements:
        warnings.warn(
            f"{disagreements} dual-labeled author(s) disagree; keeping the first label"
        )
    return out


def dual_label_pairs(records: Sequence[LabelRecord]) -> tuple[list[int], list[int]]:
    """Aligned label lists for authors rated twice, ordered by author."""
    by_author: dict[str, list[int]] = {}
    for rec in records:
        by_author.setdefault(rec.author, []).append(rec.label)
    firsts: list[int] = []
    seconds: list[int] = []
    for author in sorted(by_author):
        labels = by_author[author]
        if len(labels) >= 2:
            firsts.append(labels[0])
            seconds.append(labels[1])
    return firsts, seconds
