"""Cluster-count sweep, operating point choice, and questionnaire assembly.

A questionnaire is a decision tree whose features are symptom clusters.
The sweep trains one tree per cluster count k and scores it by
leave-one-out AUC; the operating point is the best-scoring k whose largest
cluster stays small enough to word as a single question.
"""

from __future__ import annotations

import json
import random
import warnings
from dataclasses import dataclass, field
from math import ceil
from typing import Iterable, Mapping, Sequence

import numpy as np

from screenquest.cluster import Dendrogram, Partition, cluster_label, cut
from screenquest.corpus import Post
from screenquest.symptoms import SymptomLexicon, SymptomProfile, normalize_tokens
from screenquest.tree import (
    TreeNode,
    ScreeningTreeClassifier,
    loocv_scores,
)
from screenquest.metrics import auc as roc_auc

K_MIN = 5
MAX_CLUSTER_FRACTION = 0.1
QUESTION_TEMPLATE = "Did the patient mention that he\\she {mentions}?"
EVIDENCE_PER_SYMPTOM = 3
EVIDENCE_WINDOW = 15


@dataclass
class SweepEntry:
    k: int
    auc: float
    max_cluster_size: int
    partition: Partition
    root: TreeNode


@dataclass
class SweepResult:
    symptoms: list[str]
    authors: list[str]
    entries: list[SweepEntry]

    def entry_for(self, k: int) -> SweepEntry:
        for entry in self.entries:
            if entry.k == k:
                return entry
        raise KeyError(f"no sweep entry for k={k}")


def cluster_features(matrix: np.ndarray, partition: Partition) -> np.ndarray:
    """Per-user cluster indicators: 1 if any member symptom was mentioned."""
    matrix = np.asarray(matrix)
    out = np.zeros((matrix.shape[0], partition.k), dtype=np.int8)
    for cid, members in enumerate(partition.members):
        out[:, cid] = matrix[:, members].max(axis=1)
    return out


def align_labels(profile: SymptomProfile, labels: Mapping[str, int]) -> np.ndarray:
    missing = [a for a in profile.authors if a not in labels]
    if missing:
        raise ValueError(
            f"{len(missing)} profiled author(s) have no label, e.g. {missing[:3]}"
        )
    return np.array([int(labels[a]) for a in profile.authors], dtype=np.int8)


def sweep(
    profile: SymptomProfile,
    labels: Mapping[str, int],
    dendrogram: Dendrogram,
    k_min: int = K_MIN,
    max_depth: int = 6,
    min_leaf: int = 1,
) -> SweepResult:
    """Train and score a questionnaire tree for every cluster count.

    k runs from ``k_min`` to the number of symptoms. Each k cuts the
    dendrogram, ORs the member symptom columns into cluster indicators,
    fits a tree, and records its leave-one-out AUC and the largest cluster.
    """
    n_symptoms = len(profile.symptoms)
    if dendrogram.n_leaves != n_symptoms:
        raise ValueError(
            f"dendrogram has {dendrogram.n_leaves} leaves but the profile "
            f"has {n_symptoms} symptoms"
        )
    if n_symptoms < k_min:
        raise ValueError(
            f"only {n_symptoms} symptoms but the sweep starts at k={k_min}"
        )
    y = align_labels(profile, labels)
    entries: list[SweepEntry] = []
    for k in range(k_min, n_symptoms + 1):
        partition = cut(dendrogram, k)
        X = cluster_features(profile.matrix, partition)
        scores = loocv_scores(X, y, max_depth=max_depth, min_leaf=min_leaf)
        root = ScreeningTreeClassifier(max_depth=max_depth, min_leaf=min_leaf).fit(X, y).root_
        entries.append(
            SweepEntry(
                k=k,
                auc=roc_auc(scores, y),
                max_cluster_size=partition.max_cluster_size(),
                partition=partition,
                root=root,
            )
        )
    return SweepResult(symptoms=list(profile.symptoms), authors=list(profile.authors), entries=entries)


def select_operating_point(
    result: SweepResult, max_cluster_fraction: float = MAX_CLUSTER_FRACTION
) -> SweepEntry:
    """Highest-AUC admissible entry; AUC ties prefer the larger k.

    Admissible means the largest cluster has at most
    ceil(max_cluster_fraction * n_symptoms) members, so no question has to
    enumerate a huge cluster. If nothing is admissible the entry with the
    smallest largest-cluster wins, with a warning.
    """
    cap = ceil(max_cluster_fraction * len(result.symptoms))
    admissible = [e for e in result.entries if e.max_cluster_size <= cap]
    if not admissible:
        warnings.warn(
            f"no cluster count keeps the largest cluster within {cap} "
            "symptoms; falling back to the tightest clustering"
        )
        best_size = min(e.max_cluster_size for e in result.entries)
        admissible = [e for e in result.entries if e.max_cluster_size == best_size]
    return max(admissible, key=lambda e: (e.auc, e.k))


def template_question(members: Sequence[str]) -> str:
    """Default question wording for a cluster: members joined by ' or '."""
    if not members:
        raise ValueError("cannot word a question for an empty cluster")
    return QUESTION_TEMPLATE.format(mentions=" or ".join(members))


def load_question_overrides(path) -> dict[str, str]:
    """TSV with columns node_id, question_text replacing the templated wording."""
    overrides: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            cells = line.rstrip("\n").split("\t")
            if line_no == 1 and cells[:2] == ["node_id", "question_text"]:
                continue
            if len(cells) < 2 or not cells[0].strip() or not cells[1].strip():
                raise ValueError(f"{path}:{line_no}: expected node_id<TAB>question_text")
            overrides[cells[0].strip()] = cells[1].strip()
    return overrides


@dataclass
class ClusterFeature:
    id: int
    label: str
    members: list[str]


@dataclass
class QuestionNode:
    id: str
    n_condition: int
    n_control: int
    cluster: int | None = None
    question: str | None = None
    question_source: str | None = None  # "auto" or "override"
    yes: "QuestionNode | None" = None
    no: "QuestionNode | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.cluster is None

    @property
    def probability(self) -> float:
        return self.n_condition / (self.n_condition + self.n_control)


@dataclass
class Questionnaire:
    condition: str
    k: int
    auc: float
    clusters: list[ClusterFeature]
    root: QuestionNode
    provenance: dict = field(default_factory=dict)

    def nodes(self) -> list[QuestionNode]:
        out: list[QuestionNode] = []

        def walk(node: QuestionNode) -> None:
            out.append(node)
            if not node.is_leaf:
                walk(node.yes)
                walk(node.no)

        walk(self.root)
        return out

    def paths(self) -> list["QuestionnairePath"]:
        paths: list[QuestionnairePath] = []

        def walk(node: QuestionNode, steps) -> None:
            if node.is_leaf:
                paths.append(
                    QuestionnairePath(
                        leaf_id=node.id,
                        steps=list(steps),
                        n_condition=node.n_condition,
                        n_control=node.n_control,
                    )
                )
                return
            walk(node.yes, steps + [(node.question, "yes")])
            walk(node.no, steps + [(node.question, "no")])

        walk(self.root, [])
        return paths

    def auto_question_nodes(self) -> list[str]:
        """Node ids whose wording is templated and still needs human review."""
        return [n.id for n in self.nodes() if not n.is_leaf and n.question_source == "auto"]


@dataclass
class QuestionnairePath:
    leaf_id: str
    steps: list[tuple[str, str]]
    n_condition: int
    n_control: int

    @property
    def probability(self) -> float:
        return self.n_condition / (self.n_condition + self.n_control)


def build_questionnaire(
    condition: str,
    entry: SweepEntry,
    symptoms: Sequence[str],
    overrides: Mapping[str, str] | None = None,
    provenance: Mapping | None = None,
) -> Questionnaire:
    """Attach ids, cluster metadata, and question wording to a swept tree."""
    overrides = dict(overrides or {})
    clusters = [
        ClusterFeature(
            id=cid,
            label=cluster_label([symptoms[i] for i in members]),
            members=[symptoms[i] for i in members],
        )
        for cid, members in enumerate(entry.partition.members)
    ]
    counter = 0

    def convert(node: TreeNode) -> QuestionNode:
        nonlocal counter
        node_id = f"n{counter}"
        counter += 1
        if node.is_leaf:
            return QuestionNode(
                id=node_id, n_condition=node.n_condition, n_control=node.n_control
            )
        if overrides.get(node_id):
            question = overrides[node_id]
            source = "override"
        else:
            question = template_question(clusters[node.feature].members)
            source = "auto"
        out = QuestionNode(
            id=node_id,
            n_condition=node.n_condition,
            n_control=node.n_control,
            cluster=node.feature,
            question=question,
            question_source=source,
        )
        out.yes = convert(node.yes)
        out.no = convert(node.no)
        return out

    root = convert(entry.root)
    unused = set(overrides) - {n.id for n in _walk(root) if not n.is_leaf}
    if unused:
        warnings.warn(f"question overrides for unknown node ids: {sorted(unused)}")
    return Questionnaire(
        condition=condition,
        k=entry.k,
        auc=entry.auc,
        clusters=clusters,
        root=root,
        provenance=dict(provenance or {}),
    )


def _walk(node: QuestionNode) -> Iterable[QuestionNode]:
    yield node
    if not node.is_leaf:
        yield from _walk(node.yes)
        yield from _walk(node.no)


def _node_to_dict(node: QuestionNode) -> dict:
    if node.is_leaf:
        return {
            "id": node.id,
            "kind": "leaf",
            "n_condition": node.n_condition,
            "n_control": node.n_control,
            "probability": node.probability,
        }
    return {
        "id": node.id,
        "kind": "question",
        "cluster": node.cluster,
        "question": node.question,
        "question_source": node.question_source,
        "n_condition": node.n_condition,
        "n_control": node.n_control,
        "yes": _node_to_dict(node.yes),
        "no": _node_to_dict(node.no),
    }


def _node_from_dict(data: dict) -> QuestionNode:
    if data["kind"] == "leaf":
        return QuestionNode(
            id=data["id"],
            n_condition=data["n_condition"],
            n_control=data["n_control"],
        )
    return QuestionNode(
        id=data["id"],
        n_condition=data["n_condition"],
        n_control=data["n_control"],
        cluster=data["cluster"],
        question=data["question"],
        question_source=data["question_source"],
        yes=_node_from_dict(data["yes"]),
        no=_node_from_dict(data["no"]),
    )


def questionnaire_to_dict(q: Questionnaire) -> dict:
    return {
        "condition": q.condition,
        "k": q.k,
        "auc": q.auc,
        "provenance": dict(q.provenance),
        "clusters": [
            {"id": c.id, "label": c.label, "members": list(c.members)}
            for c in q.clusters
        ],
        "tree": _node_to_dict(q.root),
    }


def questionnaire_from_dict(data: dict) -> Questionnaire:
    return Questionnaire(
        condition=data["condition"],
        k=data["k"],
        auc=data["auc"],
        provenance=dict(data.get("provenance", {})),
        clusters=[
            ClusterFeature(id=c["id"], label=c["label"], members=list(c["members"]))
            for c in data["clusters"]
        ],
        root=_node_from_dict(data["tree"]),
    )


def export_questionnaire(q: Questionnaire, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(questionnaire_to_dict(q), handle, indent=2, sort_keys=True)
        handle.write("\n")


def import_questionnaire(path) -> Questionnaire:
    with open(path, encoding="utf-8") as handle:
        return questionnaire_from_dict(json.load(handle))


def questionnaire_markdown(q: Questionnaire) -> str:
    """Human-readable rendering: every path with its final probability."""
    lines = [f"# Screening questionnaire: {q.condition}", ""]
    lines.append(f"Clusters: {q.k}; leave-one-out AUC {q.auc:.2f}")
    lines.append("")
    for number, path in enumerate(q.paths(), start=1):
        lines.append(f"## Path {number}")
        for step_no, (question, answer) in enumerate(path.steps, start=1):
            lines.append(f"{step_no}. {question} **{answer}**")
        if not path.steps:
            lines.append("(no questions)")
        lines.append(f"Probability of {q.condition}: {path.probability:.2f}")
        lines.append("")
    return "\n".join(lines)


@dataclass(frozen=True)
class EvidenceSnippet:
    post_id: str
    snippet: str


def _find_mention(tokens: list[str], phrases: list[tuple[str, ...]]) -> tuple[int, int] | None:
    for start in range(len(tokens)):
        for phrase in phrases:
            if tuple(tokens[start : start + len(phrase)]) == phrase:
                return start, start + len(phrase)
    return None


def collect_evidence(
    questionnaire: Questionnaire,
    posts_by_author: Mapping[str, Sequence[Post]],
    lexicon: SymptomLexicon,
    per_symptom: int = EVIDENCE_PER_SYMPTOM,
    window: int = EVIDENCE_WINDOW,
    seed: int = 0,
) -> dict[str, list[EvidenceSnippet]]:
    """Example snippets for every symptom in the questionnaire.

    For each symptom, up to ``per_symptom`` posts are sampled (seeded, from
    candidates sorted by post id) and the mention is excerpted with
    ``window`` words of context on each side.
    """
    wanted = sorted({m for c in questionnaire.clusters for m in c.members})
    phrases_of: dict[str, list[tuple[str, ...]]] = {s: [] for s in wanted}
    for tokens, canonical in lexicon.phrase_map.items():
        if canonical in phrases_of:
            phrases_of[canonical].append(tokens)
    for symptom in wanted:
        # longer synonyms first so the snippet centers the full phrase
        phrases_of[symptom].sort(key=lambda p: (-len(p), p))

    candidates: dict[str, list[tuple[Post, tuple[int, int], list[str]]]] = {
        s: [] for s in wanted
    }
    for author in sorted(posts_by_author):
        for post in sorted(posts_by_author[author], key=lambda p: p.id):
            tokens = normalize_tokens(post.text)
            for symptom in wanted:
                span = _find_mention(tokens, phrases_of[symptom])
                if span is not None:
                    candidates[symptom].append((post, span, tokens))

    out: dict[str, list[EvidenceSnippet]] = {}
    for symptom in wanted:
        pool = candidates[symptom]
        rng = random.Random(f"{seed}:{symptom}")
        if len(pool) > per_symptom:
            pool = rng.sample(pool, per_symptom)
            pool.sort(key=lambda item: item[0].id)
        snippets = []
        for post, (start, end), tokens in pool:
            lo = max(0, start - window)
            hi = min(len(tokens), end + window)
            snippets.append(EvidenceSnippet(post.id, " ".join(tokens[lo:hi])))
        out[symptom] = snippets
    return out


def evidence_to_dict(evidence: Mapping[str, Sequence[EvidenceSnippet]]) -> dict:
    return {
        symptom: [{"post_id": s.post_id, "snippet": s.snippet} for s in snippets]
        for symptom, snippets in sorted(evidence.items())
    }


def write_sweep(
    result: SweepResult, selected_k: int, path, header_comment: str | None = None
) -> None:
    """TSV of the sweep curve: k, AUC, largest cluster, selection marker."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header_comment:
            handle.write(f"# {header_comment}\n")
        handle.write("k\tauc\tmax_cluster_size\tselected\n")
        for entry in result.entries:
            marker = "*" if entry.k == selected_k else ""
            handle.write(
                f"{entry.k}\t{entry.auc!r}\t{entry.max_cluster_size}\t{marker}\n"
            )
