"""Pipeline configuration: one INI file drives every stage.

All tunable constants live here under their pipeline meaning (word floor,
classifier threshold, smallest cluster count, largest-cluster fraction,
number of control-selection symptoms, ...). The seed is mandatory: every
sampled artifact must be reproducible from the config alone.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    """The config file is missing, malformed, or references absent files."""


@dataclass
class PipelineConfig:
    condition: str
    seed: int
    condition_subreddits: tuple[str, ...]
    submissions: Path | None = None
    comments: Path | None = None
    labels: Path | None = None
    lexicon: tuple[Path, ...] = ()
    embeddings: Path | None = None
    relevance: Path | None = None
    question_overrides: Path | None = None
    output_dir: Path = Path("out")
    min_words: int = 80
    classifier_threshold: float = 0.5
    k_min: int = 5
    max_cluster_fraction: float = 0.1
    control_top_symptoms: int = 3
    shortlist_size: int = 13
    medical_subreddit: str = "AskDocs"
    vocab_size: int = 500
    max_depth: int = 6
    min_leaf: int = 1
    assume_relevant: bool = False
    submissions_only: bool = False
    linkage: str = "average"
    ground_metric: str = "euclidean"

    def validate(self) -> None:
        problems: list[str] = []
        if not self.condition:
            problems.append("condition is required")
        if not self.condition_subreddits:
            problems.append("condition_subreddits is required")
        if self.submissions is None and self.comments is None:
            problems.append("at least one of submissions/comments is required")
        if self.labels is None:
            problems.append("labels is required")
        if not self.lexicon:
            problems.append("lexicon is required")
        if self.embeddings is None:
            problems.append("embeddings is required")
        for name in ("submissions", "comments", "labels", "embeddings", "relevance",
                     "question_overrides"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                problems.append(f"{name} file does not exist: {path}")
        for path in self.lexicon:
            if not Path(path).is_file():
                problems.append(f"lexicon file does not exist: {path}")
        if self.min_words < 0:
            problems.append("min_words must be >= 0")
        if not 0.0 <= self.classifier_threshold <= 1.0:
            problems.append("classifier_threshold must be in [0, 1]")
        if self.k_min < 1:
            problems.append("k_min must be >= 1")
        if not 0.0 < self.max_cluster_fraction <= 1.0:
            problems.append("max_cluster_fraction must be in (0, 1]")
        if self.control_top_symptoms < 1:
            problems.append("control_top_symptoms must be >= 1")
        if self.linkage not in ("average", "complete", "single"):
            problems.append(f"unknown linkage {self.linkage!r}")
        if self.ground_metric not in ("euclidean", "cosine"):
            problems.append(f"unknown ground_metric {self.ground_metric!r}")
        if problems:
            raise ConfigError("; ".join(problems))

    def config_hash(self) -> str:
        """Stable digest of every setting; embedded in all artifacts.

        Path values hash by file name and the output directory is skipped,
        so moving a data directory does not change artifact identity; file
        contents are covered separately by the stage input digests.
        """
        parts = []
        for f in sorted(fields(self), key=lambda f: f.name):
            if f.name == "output_dir":
                continue
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = value.name
            elif isinstance(value, tuple):
                value = ",".join(
                    v.name if isinstance(v, Path) else str(v) for v in value
                )
            parts.append(f"{f.name}={value}")
        return hashlib.sha256("\n".join(parts).encode("utf-8")).hexdigest()[:16]


def derive_seed(seed: int, purpose: str) -> int:
    """Independent per-purpose seed so stages cannot couple by accident."""
    digest = hashlib.sha256(f"{seed}:{purpose}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def _split_list(raw: str) -> list[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def load_config(path) -> PipelineConfig:
    """Parse and validate an INI config; paths resolve relative to the file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file does not exist: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "pipeline" not in parser:
        raise ConfigError(f"{path}: missing [pipeline] section")
    section = parser["pipeline"]
    base = path.parent

    def get_path(key: str) -> Path | None:
        raw = section.get(key, "").strip()
        return (base / raw) if raw else None

    known = {
        "condition", "seed", "condition_subreddits", "submissions", "comments",
        "labels", "lexicon", "embeddings", "relevance", "question_overrides",
        "output_dir", "min_words", "classifier_threshold", "k_min",
        "max_cluster_fraction", "control_top_symptoms", "shortlist_size",
        "medical_subreddit", "vocab_size", "max_depth", "min_leaf",
        "assume_relevant", "submissions_only", "linkage", "ground_metric",
    }
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"{path}: unknown settings: {', '.join(sorted(unknown))}")
    if "seed" not in section:
        raise ConfigError(f"{path}: seed is required")

    try:
        config = PipelineConfig(
            condition=section.get("condition", "").strip(),
            seed=section.getint("seed"),
            condition_subreddits=tuple(_split_list(section.get("condition_subreddits", ""))),
            submissions=get_path("submissions"),
            comments=get_path("comments"),
            labels=get_path("labels"),
            lexicon=tuple(base / p for p in _split_list(section.get("lexicon", ""))),
            embeddings=get_path("embeddings"),
            relevance=get_path("relevance"),
            question_overrides=get_path("question_overrides"),
            output_dir=base / section.get("output_dir", "out").strip(),
            min_words=section.getint("min_words", 80),
            classifier_threshold=section.getfloat("classifier_threshold", 0.5),
            k_min=section.getint("k_min", 5),
            max_cluster_fraction=section.getfloat("max_cluster_fraction", 0.1),
            control_top_symptoms=section.getint("control_top_symptoms", 3),
            shortlist_size=section.getint("shortlist_size", 13),
            medical_subreddit=section.get("medical_subreddit", "AskDocs").strip(),
            vocab_size=section.getint("vocab_size", 500),
            max_depth=section.getint("max_depth", 6),
            min_leaf=section.getint("min_leaf", 1),
            assume_relevant=section.getboolean("assume_relevant", False),
            submissions_only=section.getboolean("submissions_only", False),
            linkage=section.get("linkage", "average").strip(),
            ground_metric=section.get("ground_metric", "euclidean").strip(),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    config.validate()
    return config
