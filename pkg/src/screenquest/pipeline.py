"""End-to-end pipeline: dumps in, questionnaire and reports out.

Stages run in order and memoize within a run; the expensive ones
(profiles, distances, sweep) are additionally cached on disk under the
output directory, keyed by a hash of the config and every input file, so
a re-run with unchanged inputs skips the computation and produces the
same bytes. Every artifact embeds the config hash.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from screenquest import (
    cluster,
    cohort,
    corpus,
    questionnaire as quest,
    reports,
    scoring,
    symptoms,
    tree as dtree,
    wmd,
)
from screenquest.config import PipelineConfig, derive_seed
from screenquest.metrics import cohen_kappa

log = logging.getLogger("screenquest.pipeline")


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def file_digest(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]


class StageCache:
    """Skip a stage when its recorded input hash matches and outputs exist."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)

    def manifest_path(self, stage: str) -> Path:
        return self.root / f"{stage}.json"

    def load(self, stage: str, input_hash: str) -> dict | None:
        path = self.manifest_path(stage)
        if not path.is_file():
            return None
        try:
            recorded = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError:
            return None
        if recorded.get("input_hash") != input_hash:
            return None
        if not all(Path(p).is_file() for p in recorded.get("outputs", [])):
            return None
        return recorded

    def store(self, stage: str, input_hash: str, outputs: list[Path], extra: dict | None = None) -> None:
        data = {"input_hash": input_hash, "outputs": [str(p) for p in outputs]}
        data.update(extra or {})
        self.manifest_path(stage).write_text(
            json.dumps(data, indent=2, sort_keys=True) + "\n", "utf-8"
        )


@dataclass
class PipelineResult:
    config: PipelineConfig
    cohort_authors: list[str]
    control_authors: list[str]
    questionnaire: quest.Questionnaire
    summary: reports.RunSummary
    artifacts: dict[str, Path]


def _stage(name):
    """Wrap a stage method: memoize per run, wrap errors with the stage name."""

    def decorate(fn):
        attr = f"_memo_{fn.__name__}"

        def wrapper(self):
            if getattr(self, attr, None) is None:
                try:
                    setattr(self, attr, fn(self))
                except StageError:
                    raise
                except (ValueError, OSError) as exc:
                    raise StageError(name, exc) from exc
            return getattr(self, attr)

        wrapper.__doc__ = fn.__doc__
        wrapper.__name__ = fn.__name__
        return wrapper

    return decorate


class PipelineRun:
    """One configured run. The command line calls individual stages; each
    stage pulls what it needs, so running a late stage runs the earlier
    ones (or hits their caches)."""

    def __init__(self, config: PipelineConfig):
        config.validate()
        self.config = config
        self.out = Path(config.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.cache = StageCache(self.out / "cache")
        self.hash = config.config_hash()
        self.provenance_line = f"config_hash={self.hash}"
        self._input_digest: str | None = None

    def input_digest(self) -> str:
        """Hash of config plus every input file; keys the stage cache."""
        if self._input_digest is None:
            parts = [self.hash]
            for path in [
                self.config.submissions, self.config.comments, self.config.labels,
                self.config.embeddings, self.config.relevance,
                self.config.question_overrides, *self.config.lexicon,
            ]:
                if path is not None:
                    parts.append(file_digest(path))
            self._input_digest = hashlib.sha256(
                "\n".join(parts).encode("utf-8")
            ).hexdigest()[:16]
        return self._input_digest

    # ---- stages --------------------------------------------------------

    @_stage("ingest")
    def load_corpus(self) -> corpus.Corpus:
        """Parse the dumps and build per-user records."""
        data = corpus.Corpus.load(self.config.submissions, self.config.comments)
        _write_json(
            self.out / "ingest_stats.json",
            {
                "config_hash": self.hash,
                "submissions": _stats_dict(data.submission_stats),
                "comments": _stats_dict(data.comment_stats),
                "users": len(data.users),
            },
        )
        log.info("ingest: %d posts from %d users", len(data.posts), len(data.users))
        return data

    @_stage("lexicon")
    def load_lexicon(self) -> symptoms.SymptomLexicon:
        """Load and merge the symptom lexicons."""
        parts = [symptoms.load_lexicon(p) for p in self.config.lexicon]
        return symptoms.merge_lexicons(*parts)

    @_stage("cohort-train")
    def train_classifier(self) -> cohort.SelfReportModel:
        """Fit the self-report classifier on the hand-labeled users."""
        cfg = self.config
        records = cohort.load_labels(cfg.labels)
        train_labels = cohort.training_labels(records)
        candidates = self.condition_posters()
        missing = sorted(a for a in train_labels if a not in candidates)
        if missing:
            raise ValueError(
                f"{len(missing)} labeled author(s) have no condition-subreddit "
                f"posts, e.g. {missing[:3]}"
            )
        subs = set(cfg.condition_subreddits)
        texts = [
            "\n".join(p.text for p in candidates[a].posts if p.subreddit in subs)
            for a in sorted(train_labels)
        ]
        vocab = cohort.build_vocabulary(texts, cfg.vocab_size)
        labeled = [
            (
                cohort.extract_features(candidates[a], vocab, cfg.condition_subreddits),
                bool(train_labels[a]),
            )
            for a in sorted(train_labels)
        ]
        model = cohort.train_selfreport_classifier(
            labeled, vocab, max_depth=cfg.max_depth, min_leaf=cfg.min_leaf
        )
        firsts, seconds = cohort.dual_label_pairs(records)
        kappa = cohen_kappa(firsts, seconds) if firsts else None
        tpr, fpr = model.rates_at(cfg.classifier_threshold)
        _write_json(
            self.out / "classifier_report.json",
            {
                "config_hash": self.hash,
                "n_labeled": len(labeled),
                "n_dual_labeled": len(firsts),
                "labeler_kappa": kappa,
                "loocv_auc": model.loocv_auc,
                "threshold": cfg.classifier_threshold,
                "true_positive_rate": tpr,
                "false_positive_rate": fpr,
            },
        )
        log.info("classifier: leave-one-out AUC %.3f", model.loocv_auc)
        return model

    def condition_posters(self) -> dict[str, corpus.UserRecord]:
        data = self.load_corpus()
        subs = set(self.config.condition_subreddits)
        return {
            author: record
            for author, record in data.users.items()
            if any(p.subreddit in subs for p in record.posts)
        }

    @_stage("cohort-apply")
    def label_condition_users(self) -> cohort.CohortLabeling:
        """Score every condition-subreddit poster and write cohort.tsv."""
        cfg = self.config
        model = self.train_classifier()
        candidates = self.condition_posters()
        features = [
            cohort.extract_features(candidates[a], model.vocab, cfg.condition_subreddits)
            for a in sorted(candidates)
        ]
        labeling = cohort.label_cohort(model, features, cfg.classifier_threshold)
        path = self.out / "cohort.tsv"
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(f"# {self.provenance_line}\n")
            handle.write("author\tscore\tlabel\n")
            for author in sorted(labeling.labels):
                handle.write(
                    f"{author}\t{labeling.scores[author]!r}\t{labeling.labels[author]}\n"
                )
        log.info(
            "cohort: %d of %d candidates labeled condition",
            len(labeling.condition_users),
            len(labeling.labels),
        )
        return labeling

    @_stage("cohort-records")
    def cohort_records(self) -> dict[str, corpus.UserRecord]:
        data = self.load_corpus()
        return {a: data.users[a] for a in self.label_condition_users().condition_users}

    @_stage("shortlist")
    def shortlist(self) -> corpus.SubredditShortlist:
        """Rank subreddits by cohort activity and fold in relevance answers."""
        cfg = self.config
        cohort_users = self.cohort_records()
        shortlist = corpus.build_shortlist(
            cohort_users.values(),
            cfg.condition_subreddits,
            size=cfg.shortlist_size,
            min_words=cfg.min_words,
            submissions_only=cfg.submissions_only,
        )
        items = corpus.sample_for_relevance(
            shortlist,
            cohort_users.values(),
            cfg.condition_subreddits,
            seed=derive_seed(cfg.seed, "relevance"),
            min_words=cfg.min_words,
            submissions_only=cfg.submissions_only,
        )
        corpus.write_annotation_sheet(
            items, self.out / "annotation_sheet.tsv", self.provenance_line
        )
        if cfg.relevance is not None:
            corpus.apply_relevance(shortlist, corpus.read_annotation_sheet(cfg.relevance))
        corpus.write_shortlist(shortlist, self.out / "shortlist.tsv", self.provenance_line)
        return shortlist

    @_stage("relevance")
    def relevant_subreddits(self) -> list[str]:
        """The shortlisted subreddits cleared (or assumed) as relevant."""
        return corpus.relevant_subreddits(self.shortlist(), self.config.assume_relevant)

    @_stage("controls")
    def controls(self) -> list[str]:
        """Select control users and write controls.tsv."""
        cfg = self.config
        data = self.load_corpus()
        lexicon = self.load_lexicon()
        cohort_users = self.cohort_records()
        relevant = self.relevant_subreddits()
        profile = symptoms.profile_population(
            self._cohort_texts(cohort_users, relevant), lexicon
        )
        targets = symptoms.top_symptoms(profile, cfg.control_top_symptoms)
        selected = cohort.select_controls(
            data.users,
            lexicon,
            targets,
            relevant_subreddits=relevant,
            condition_subreddits=cfg.condition_subreddits,
            medical_subreddit=cfg.medical_subreddit,
            min_words=cfg.min_words,
        )
        with open(self.out / "controls.tsv", "w", encoding="utf-8", newline="\n") as handle:
            handle.write(f"# {self.provenance_line}\n")
            handle.write("author\n")
            for author in selected:
                handle.write(author + "\n")
        _write_json(
            self.out / "control_targets.json",
            {"config_hash": self.hash, "symptoms": targets},
        )
        log.info("controls: %d users via %s", len(selected), targets)
        return selected

    def _cohort_texts(self, cohort_users, relevant) -> dict[str, list[str]]:
        cfg = self.config
        return {
            author: [
                p.text
                for p in corpus.prior_posts(
                    record,
                    cfg.condition_subreddits,
                    allowed_subreddits=relevant,
                    min_words=cfg.min_words,
                    submissions_only=cfg.submissions_only,
                )
            ]
            for author, record in cohort_users.items()
        }

    def _control_texts(self, control_authors, relevant) -> dict[str, list[str]]:
        data = self.load_corpus()
        subs = set(relevant)
        return {
            author: [p.text for p in data.users[author].posts if p.subreddit in subs]
            for author in control_authors
        }

    @_stage("profiles")
    def profiles(self) -> tuple[symptoms.SymptomProfile, dict[str, int]]:
        """Mention profiles for cohort plus controls, with condition labels.

        Only symptoms someone actually mentioned keep a column. Cohort
        users without a single qualifying prior post in the relevant
        subreddits drop out here.
        """
        path = self.out / "profiles.tsv"
        labels_path = self.out / "profile_labels.tsv"
        stage_hash = self.input_digest()

        cohort_users = self.cohort_records()
        relevant = self.relevant_subreddits()
        control_authors = self.controls()
        cohort_texts = self._cohort_texts(cohort_users, relevant)
        kept = {a: t for a, t in cohort_texts.items() if t}
        dropped = len(cohort_texts) - len(kept)
        if dropped:
            log.info(
                "profiles: %d cohort user(s) had no qualifying prior posts and were dropped",
                dropped,
            )
        control_texts = self._control_texts(control_authors, relevant)
        overlap = set(kept) & set(control_texts)
        if overlap:
            raise ValueError(
                f"users appear in both cohort and controls: {sorted(overlap)[:3]}"
            )
        labels = {a: 1 for a in kept}
        labels.update({a: 0 for a in control_texts})

        if self.cache.load("profiles", stage_hash) is not None:
            log.info("profiles: cache hit")
            return symptoms.read_profile(path), labels

        texts = dict(kept)
        texts.update(control_texts)
        profile = symptoms.profile_population(texts, self.load_lexicon()).mentioned_only()
        symptoms.write_profile(profile, path, self.provenance_line)
        with open(labels_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(f"# {self.provenance_line}\n")
            handle.write("author\tlabel\n")
            for author in profile.authors:
                handle.write(f"{author}\t{labels[author]}\n")
        self.cache.store("profiles", stage_hash, [path, labels_path])
        return profile, labels

    @_stage("distances")
    def distances(self) -> wmd.DistanceMatrix:
        """Word-mover distances between every pair of profiled symptoms."""
        path = self.out / "distances.tsv"
        stage_hash = self.input_digest()
        if self.cache.load("distances", stage_hash) is not None:
            log.info("distances: cache hit")
            return wmd.read_distance_matrix(path)
        profile, _ = self.profiles()
        store = wmd.load_embeddings(self.config.embeddings)
        matrix = wmd.distance_matrix(
            profile.symptoms, store, metric=self.config.ground_metric
        )
        wmd.write_distance_matrix(matrix, path, self.provenance_line)
        self.cache.store("distances", stage_hash, [path])
        log.info("distances: %d symptoms", len(matrix.labels))
        return matrix

    @_stage("sweep")
    def sweep(self) -> tuple[quest.SweepResult, int]:
        """Score every cluster count and pick the operating point."""
        path = self.out / "sweep.tsv"
        cfg = self.config
        stage_hash = self.input_digest()
        profile, labels = self.profiles()
        matrix = self.distances()
        dendrogram = cluster.agglomerate(matrix.values, cfg.linkage)

        cached = self.cache.load("sweep", stage_hash)
        if cached is not None and "trees" in cached:
            log.info("sweep: cache hit")
            entries = []
            for row in cached["rows"]:
                k = row["k"]
                partition = cluster.cut(dendrogram, k)
                entries.append(
                    quest.SweepEntry(
                        k=k,
                        auc=row["auc"],
                        max_cluster_size=partition.max_cluster_size(),
                        partition=partition,
                        root=dtree.tree_from_dict(cached["trees"][str(k)]),
                    )
                )
            result = quest.SweepResult(
                symptoms=list(profile.symptoms),
                authors=list(profile.authors),
                entries=entries,
            )
            return result, cached["selected_k"]

        result = quest.sweep(
            profile, labels, dendrogram,
            k_min=cfg.k_min, max_depth=cfg.max_depth, min_leaf=cfg.min_leaf,
        )
        selected = quest.select_operating_point(result, cfg.max_cluster_fraction)
        quest.write_sweep(result, selected.k, path, self.provenance_line)
        self.cache.store(
            "sweep",
            stage_hash,
            [path],
            extra={
                "rows": [
                    {"k": e.k, "auc": e.auc, "max_cluster_size": e.max_cluster_size}
                    for e in result.entries
                ],
                "trees": {str(e.k): dtree.tree_to_dict(e.root) for e in result.entries},
                "selected_k": selected.k,
            },
        )
        log.info("sweep: selected k=%d (auc %.3f)", selected.k, selected.auc)
        return result, selected.k

    @_stage("build")
    def build(self) -> PipelineResult:
        """Run everything and write the questionnaire plus reports."""
        cfg = self.config
        model = self.train_classifier()
        cohort_users = self.cohort_records()
        relevant = self.relevant_subreddits()
        profile, labels = self.profiles()
        result, selected_k = self.sweep()
        entry = result.entry_for(selected_k)
        overrides = (
            quest.load_question_overrides(cfg.question_overrides)
            if cfg.question_overrides is not None
            else None
        )
        built = quest.build_questionnaire(
            cfg.condition,
            entry,
            profile.symptoms,
            overrides=overrides,
            provenance={
                "config_hash": self.hash,
                "input_digest": self.input_digest(),
                "seed": cfg.seed,
            },
        )
        quest.export_questionnaire(built, self.out / "questionnaire.json")
        (self.out / "questionnaire.md").write_text(
            quest.questionnaire_markdown(built), "utf-8"
        )
        cluster.write_partition(
            entry.partition, profile.symptoms, self.out / "clusters.tsv",
            self.provenance_line,
        )

        cohort_in_profile = [a for a in profile.authors if labels[a] == 1]
        evidence = quest.collect_evidence(
            built,
            {
                a: corpus.prior_posts(
                    cohort_users[a],
                    cfg.condition_subreddits,
                    allowed_subreddits=relevant,
                    min_words=cfg.min_words,
                    submissions_only=cfg.submissions_only,
                )
                for a in cohort_in_profile
            },
            self.load_lexicon(),
            seed=derive_seed(cfg.seed, "evidence"),
        )
        _write_json(
            self.out / "evidence.json",
            {"config_hash": self.hash, "symptoms": quest.evidence_to_dict(evidence)},
        )

        summary = reports.RunSummary(
            condition=cfg.condition,
            cohort_size=len(cohort_in_profile),
            control_size=sum(1 for a in profile.authors if labels[a] == 0),
            n_clusters=selected_k,
            n_symptoms=len(profile.symptoms),
            classifier_auc=model.loocv_auc,
            questionnaire_auc=entry.auc,
        )
        (self.out / "summary.tsv").write_text(
            f"# {self.provenance_line}\n" + reports.summary_tsv([summary]), "utf-8"
        )
        (self.out / "summary.md").write_text(reports.summary_markdown([summary]), "utf-8")

        sheet = scoring.generate_sheet(built, derive_seed(cfg.seed, "sheet"))
        scoring.write_sheet(sheet, self.out / "sheet.tsv", self.provenance_line)

        artifacts = {
            name: self.out / name
            for name in (
                "questionnaire.json", "questionnaire.md", "clusters.tsv",
                "evidence.json", "summary.tsv", "summary.md", "sweep.tsv",
                "profiles.tsv", "distances.tsv", "cohort.tsv", "controls.tsv",
                "shortlist.tsv", "sheet.tsv", "classifier_report.json",
            )
        }
        return PipelineResult(
            config=cfg,
            cohort_authors=cohort_in_profile,
            control_authors=list(self.controls()),
            questionnaire=built,
            summary=summary,
            artifacts=artifacts,
        )


def _stats_dict(stats: corpus.ParseStats) -> dict:
    return {
        "total_lines": stats.total_lines,
        "malformed": stats.malformed,
        "parsed": stats.parsed,
    }


def _write_json(path: Path, data: dict) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", "utf-8")


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    return PipelineRun(config).build()
