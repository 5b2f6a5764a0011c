"""Symptom lexicon loading and per-user mention profiles.

The lexicon maps synonym phrases to canonical symptom names. Matching is
whole-word and case-insensitive: text is lowercased, punctuation becomes
spaces, and a synonym matches where its tokens appear as a contiguous run.
"""

from __future__ import annotations

import csv
import re
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from screenquest.checks import check_binary_matrix

_NON_WORD = re.compile(r"[^a-z0-9]+")


def normalize_tokens(text: str) -> list[str]:
    """Lowercase, turn punctuation into spaces, split on whitespace."""
    return [t for t in _NON_WORD.split(text.lower()) if t]


class LexiconConflictError(ValueError):
    """A synonym phrase maps to two different canonical symptoms."""


@dataclass(frozen=True)
class LexiconEntry:
    canonical: str
    synonym: str
    source: str = ""


@dataclass
class SymptomLexicon:
    entries: list[LexiconEntry] = field(default_factory=list)

    def __post_init__(self):
        self._phrase_map: dict[tuple[str, ...], str] = {}
        canonicals: list[str] = []
        for entry in self.entries:
            tokens = tuple(normalize_tokens(entry.synonym))
            if not tokens:
                raise ValueError(f"synonym {entry.synonym!r} has no tokens")
            existing = self._phrase_map.get(tokens)
            if existing is not None and existing != entry.canonical:
                raise LexiconConflictError(
                    f"synonym {entry.synonym!r} maps to both {existing!r} "
                    f"and {entry.canonical!r}"
                )
            self._phrase_map[tokens] = entry.canonical
            if entry.canonical not in canonicals:
                canonicals.append(entry.canonical)
        self._canonicals = canonicals

    @property
    def canonicals(self) -> list[str]:
        return list(self._canonicals)

    @property
    def phrase_map(self) -> dict[tuple[str, ...], str]:
        return dict(self._phrase_map)

    def synonyms_of(self, canonical: str) -> list[str]:
        return [e.synonym for e in self.entries if e.canonical == canonical]


def load_lexicon(path, default_source: str = "") -> SymptomLexicon:
    """Read a lexicon TSV with columns canonical, synonym[, source].

    A header row is recognized by its literal column names. Conflicting
    synonym rows raise LexiconConflictError naming both canonicals.
    """
    entries: list[LexiconEntry] = []
    with open(path, encoding="utf-8") as handle:
        reader = csv.reader(handle, delimiter="\t")
        for row_no, row in enumerate(reader, start=1):
            if not row or not "".join(row).strip():
                continue
            if row_no == 1 and [c.strip().lower() for c in row[:2]] == ["canonical", "synonym"]:
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{row_no}: expected at least 2 columns")
            canonical = row[0].strip()
            synonym = row[1].strip()
            source = row[2].strip() if len(row) > 2 else default_source
            if not canonical or not synonym:
                raise ValueError(f"{path}:{row_no}: empty canonical or synonym")
            entries.append(LexiconEntry(canonical, synonym, source))
    return SymptomLexicon(entries)


def merge_lexicons(*lexicons: SymptomLexicon) -> SymptomLexicon:
    """Combine lexicons; conflicts across sources are errors just like within."""
    entries: list[LexiconEntry] = []
    for lex in lexicons:
        entries.extend(lex.entries)
    return SymptomLexicon(entries)


def match_symptoms(text: str, lexicon: SymptomLexicon) -> set[str]:
    """Canonical symptoms whose synonyms occur in the text.

    Multi-word synonyms must appear as contiguous tokens; matching is on
    whole tokens only, so 'ache' does not match inside 'headache'.
    """
    tokens = normalize_tokens(text)
    if not tokens:
        return set()
    phrase_map = lexicon._phrase_map
    max_len = max((len(k) for k in phrase_map), default=0)
    found: set[str] = set()
    for start in range(len(tokens)):
        for length in range(1, min(max_len, len(tokens) - start) + 1):
            canonical = phrase_map.get(tuple(tokens[start : start + length]))
            if canonical is not None:
                found.add(canonical)
    return found


@dataclass
class SymptomProfile:
    """Binary user-by-symptom mention matrix."""

    authors: list[str]
    symptoms: list[str]
    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        if self.matrix.shape != (len(self.authors), len(self.symptoms)):
            raise ValueError("profile matrix shape does not match labels")

    @property
    def counts(self) -> dict[str, int]:
        """Distinct users mentioning each symptom."""
        totals = self.matrix.sum(axis=0)
        return {s: int(c) for s, c in zip(self.symptoms, totals)}

    def restrict(self, symptoms: Sequence[str]) -> "SymptomProfile":
        index = {s: i for i, s in enumerate(self.symptoms)}
        cols = [index[s] for s in symptoms]
        return SymptomProfile(list(self.authors), list(symptoms), self.matrix[:, cols])

    def mentioned_only(self) -> "SymptomProfile":
        keep = [s for s, c in self.counts.items() if c > 0]
        return self.restrict(keep)


def profile_population(
    texts_by_author: Mapping[str, Iterable[str]], lexicon: SymptomLexicon
) -> SymptomProfile:
    """Profile each author over their given texts.

    Authors are sorted for a stable row order; columns follow the lexicon's
    canonical order. An author counts once per symptom no matter how often
    they mention it.
    """
    authors = sorted(texts_by_author)
    symptoms = lexicon.canonicals
    col = {s: i for i, s in enumerate(symptoms)}
    matrix = np.zeros((len(authors), len(symptoms)), dtype=np.int8)
    for r, author in enumerate(authors):
        for text in texts_by_author[author]:
            for canonical in match_symptoms(text, lexicon):
                matrix[r, col[canonical]] = 1
    return SymptomProfile(authors, symptoms, matrix)


def top_symptoms(profile: SymptomProfile, k: int) -> list[str]:
    """The k most-mentioned symptoms, ties broken lexicographically.

    Asking for more symptoms than exist returns them all with a warning.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    counts = profile.counts
    ranked = sorted(counts, key=lambda s: (-counts[s], s))
    if k > len(ranked):
        warnings.warn(
            f"asked for top {k} symptoms but only {len(ranked)} exist; returning all"
        )
        return ranked
    return ranked[:k]


class SymptomVectorizer(BaseEstimator, TransformerMixin):
    """Transformer from raw texts to binary symptom-mention vectors.

    Rows are texts (or iterables of texts); columns are the lexicon's
    canonical symptoms in order.
    """

    def __init__(self, lexicon: SymptomLexicon | None = None):
        self.lexicon = lexicon

    def fit(self, X, y=None):
        if self.lexicon is None:
            raise ValueError("SymptomVectorizer needs a lexicon")
        self.symptoms_ = self.lexicon.canonicals
        self.n_features_in_ = 1
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "symptoms_"):
            raise ValueError("SymptomVectorizer is not fitted")
        col = {s: i for i, s in enumerate(self.symptoms_)}
        out = np.zeros((len(X), len(self.symptoms_)), dtype=np.int8)
        for r, item in enumerate(X):
            texts = [item] if isinstance(item, str) else list(item)
            for text in texts:
                for canonical in match_symptoms(text, self.lexicon):
                    out[r, col[canonical]] = 1
        return out

    def get_feature_names_out(self, input_features=None):
        return np.asarray(self.symptoms_, dtype=object)


def write_profile(profile: SymptomProfile, path, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header_comment:
            handle.write(f"# {header_comment}\n")
        handle.write("\t".join(["author"] + profile.symptoms) + "\n")
        for author, row in zip(profile.authors, profile.matrix):
            handle.write("\t".join([author] + [str(int(x)) for x in row]) + "\n")


def read_profile(path) -> SymptomProfile:
    with open(path, encoding="utf-8") as handle:
        lines = (line for line in handle if not line.startswith("#"))
        header = next(lines).rstrip("\n").split("\t")
        symptoms = header[1:]
        authors: list[str] = []
        rows: list[list[int]] = []
        for line in lines:
            cells = line.rstrip("\n").split("\t")
            authors.append(cells[0])
            rows.append([int(x) for x in cells[1:]])
    matrix = np.array(rows, dtype=np.int8) if rows else np.zeros((0, len(symptoms)), np.int8)
    check_binary_matrix(matrix, "profile matrix")
    return SymptomProfile(authors, symptoms, matrix)
