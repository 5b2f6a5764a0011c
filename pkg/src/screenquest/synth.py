"""Synthetic corpus generator with a planted condition signal.

The generator fabricates a condition subreddit full of self-reports, a
population of control candidates asking about symptoms in a medical advice
subreddit, a symptom lexicon laid out in tight embedding groups, and the
matching word vectors. Symptom groups are either "signal" (condition users
mention them more, controlled by a strength knob) or "common" (equal rates
on both sides, which is what makes control selection work).

With strength s and base rate q, a signal group is mentioned by condition
users with probability q + s*(1-q) and by controls with q*(1-s): at s=0
both sides are identical, at s=1 the split is 100%/0%.
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from screenquest.corpus import Post, write_dump

GROUP_BASES = (
    "ache", "worry", "bloat", "fog", "joint",
    "prickle", "flutter", "sweat", "shed", "numb",
)
MEMBER_SUFFIXES = ("form", "wave", "bout")
SYNONYM_SUFFIXES = ("spell", "rush", "fit")

FILLER_WORDS = (
    "garden", "window", "coffee", "morning", "bicycle", "letter", "bridge",
    "raining", "yesterday", "weekend", "kitchen", "neighbor", "travel",
    "music", "river", "sunset", "market", "jacket", "story", "reading",
    "walking", "evening", "street", "holiday", "painting", "recipe",
    "mountain", "library", "ticket", "picture", "winter", "summer",
    "thinking", "wondering", "planning", "started", "finished", "moved",
    "bought", "found", "small", "quiet", "bright", "early", "later",
    "around", "really", "pretty",
)

RELEVANT_POOL = ("AskDocs", "dailychat", "generalhealth", "hobbycorner", "nightowls")


@dataclass
class SynthSpec:
    """Knobs for one synthetic corpus. Everything is seeded and deterministic."""

    seed: int = 7
    condition: str = "glimmerfog"
    n_condition: int = 200
    n_control: int = 200
    n_nonreport: int = 40
    strength: float = 0.9
    base_rate: float = 0.3
    common_rate: float = 0.9
    n_groups: int = 10
    members_per_group: int = 3
    n_common_groups: int = 3
    dim: int = 10
    center_scale: float = 3.0
    token_jitter: float = 0.01
    posts_per_user: int = 5
    min_words: int = 85
    n_labeled_report: int = 60
    n_labeled_nonreport: int = 20
    n_dual_labeled: int = 12
    n_label_disagreements: int = 2
    base_time: int = 1_500_000_000

    def __post_init__(self):
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError("strength must be in [0, 1]")
        if self.n_groups > len(GROUP_BASES):
            raise ValueError(f"at most {len(GROUP_BASES)} groups supported")
        if self.members_per_group > len(MEMBER_SUFFIXES):
            raise ValueError(f"at most {len(MEMBER_SUFFIXES)} members per group")
        if self.n_common_groups > self.n_groups:
            raise ValueError("more common groups than groups")
        if self.n_nonreport < 2 or self.n_condition < 2:
            raise ValueError("need at least two users per class to train on")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_file(cls, path) -> "SynthSpec":
        with open(path, encoding="utf-8") as handle:
            return cls(**json.load(handle))


@dataclass(frozen=True)
class SymptomGroup:
    group_id: int
    common: bool
    canonicals: tuple[str, ...]
    synonyms: tuple[str, ...]  # one per canonical

    @property
    def primary(self) -> str:
        return self.canonicals[0]


def symptom_groups(spec: SynthSpec) -> list[SymptomGroup]:
    groups = []
    for g in range(spec.n_groups):
        base = GROUP_BASES[g]
        canonicals = tuple(base + s for s in MEMBER_SUFFIXES[: spec.members_per_group])
        synonyms = tuple(base + s for s in SYNONYM_SUFFIXES[: spec.members_per_group])
        groups.append(
            SymptomGroup(
                group_id=g,
                common=g < spec.n_common_groups,
                canonicals=canonicals,
                synonyms=synonyms,
            )
        )
    return groups


def effective_rates(spec: SynthSpec, group: SymptomGroup) -> tuple[float, float]:
    """(condition-user rate, control rate) of mentioning this group."""
    if group.common:
        return spec.common_rate, spec.common_rate
    q, s = spec.base_rate, spec.strength
    return q + s * (1.0 - q), q * (1.0 - s)


@dataclass
class SynthArtifacts:
    out_dir: Path
    submissions: Path
    comments: Path
    labels: Path
    lexicon: Path
    embeddings: Path
    truth_users: Path
    truth_groups: Path
    spec_file: Path
    config: Path


def _filler(rng: random.Random, n_words: int) -> list[str]:
    return [rng.choice(FILLER_WORDS) for _ in range(n_words)]


def _mention_phrase(rng: random.Random, spec: SynthSpec, group: SymptomGroup) -> str:
    """Pick the wording of one group mention.

    Common groups lean heavily on their primary symptom (that is what makes
    them reliable control-selection anchors); signal groups spread evenly.
    Half the time the synonym stands in for the canonical term.
    """
    if group.common and rng.random() < 0.9:
        idx = 0
    else:
        idx = rng.randrange(len(group.canonicals))
    if rng.random() < 0.5:
        return group.synonyms[idx]
    return group.canonicals[idx]


class _PostFactory:
    def __init__(self, spec: SynthSpec):
        self.spec = spec
        self.counter = 0
        self.first_submission: dict[str, str] = {}

    def next_id(self) -> str:
        self.counter += 1
        return f"p{self.counter:06d}"

    def make(self, author, subreddit, created, words, kind, title="") -> Post:
        post_id = self.next_id()
        if kind == "submission":
            post = Post(
                id=post_id, author=author, subreddit=subreddit,
                created_utc=created, kind="submission",
                title=title, body=" ".join(words),
            )
            self.first_submission.setdefault(subreddit, post_id)
            return post
        parent = self.first_submission.get(subreddit)
        if parent is None:
            # nothing to reply to yet; promote to a submission
            return self.make(author, subreddit, created, words, "submission", title)
        return Post(
            id=post_id, author=author, subreddit=subreddit,
            created_utc=created, kind="comment",
            body=" ".join(words), parent_id=f"t3_{parent}",
        )


def generate(spec: SynthSpec, out_dir) -> SynthArtifacts:
    """Write a complete synthetic corpus into ``out_dir``.

    Outputs: submissions.jsonl / comments.jsonl dumps, hand-label file,
    symptom lexicon, word vectors, ground-truth tables, the resolved spec,
    and a ready-to-run pipeline config.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups = symptom_groups(spec)
    factory = _PostFactory(spec)
    posts: list[Post] = []
    truth_rows: list[tuple[str, str, list[int]]] = []

    # seed one submission per subreddit so comments have something to answer
    seed_rng = random.Random(f"{spec.seed}:seedposts")
    for sub in RELEVANT_POOL:
        posts.append(
            factory.make(
                "seedbot", sub, spec.base_time - 86400,
                _filler(seed_rng, spec.min_words), "submission", title="welcome thread",
            )
        )

    report_authors = [f"case{i:04d}" for i in range(spec.n_condition)]
    nonreport_authors = [f"meta{i:04d}" for i in range(spec.n_nonreport)]
    control_authors = [f"ctrl{i:04d}" for i in range(spec.n_control)]

    for i, author in enumerate(report_authors):
        rng = random.Random(f"{spec.seed}:user:{author}")
        t_report = spec.base_time + 20_000_000 + i * 1000
        bodies, mentioned = _user_bodies(
            rng, spec, groups, condition_side=True, n_posts=spec.posts_per_user
        )
        truth_rows.append((author, "condition", mentioned))
        for j, words in enumerate(bodies):
            sub = RELEVANT_POOL[(i + j) % len(RELEVANT_POOL)]
            kind = "submission" if j % 2 == 0 else "comment"
            created = t_report - (spec.posts_per_user - j) * 7200
            posts.append(factory.make(author, sub, created, words, kind, title="journal"))
        report_words = (
            f"i finally got diagnosed with {spec.condition} by my doctor last "
            "week and honestly it explains so much"
        ).split() + _filler(rng, 30)
        posts.append(
            factory.make(
                author, spec.condition, t_report, report_words, "submission",
                title=f"finally a {spec.condition} diagnosis",
            )
        )
        # one post after the self-report; the prior-post filter must drop it
        posts.append(
            factory.make(
                author, RELEVANT_POOL[i % len(RELEVANT_POOL)], t_report + 86400,
                _filler(rng, spec.min_words), "comment",
            )
        )

    for i, author in enumerate(nonreport_authors):
        rng = random.Random(f"{spec.seed}:user:{author}")
        t_post = spec.base_time + 20_000_000 + i * 1300
        bodies, mentioned = _user_bodies(
            rng, spec, groups, condition_side=False, n_posts=3
        )
        truth_rows.append((author, "nonreport", mentioned))
        for j, words in enumerate(bodies):
            sub = RELEVANT_POOL[(i + j) % len(RELEVANT_POOL)]
            posts.append(
                factory.make(author, sub, t_post - (3 - j) * 7200, words, "comment")
            )
        question_words = (
            f"has anyone here read about {spec.condition} i keep seeing the "
            "name around and i am curious what it actually feels like"
        ).split() + _filler(rng, 25)
        posts.append(
            factory.make(
                author, spec.condition, t_post, question_words, "submission",
                title=f"curious about {spec.condition}",
            )
        )

    for i, author in enumerate(control_authors):
        rng = random.Random(f"{spec.seed}:user:{author}")
        t0 = spec.base_time + 10_000_000 + i * 900
        bodies, mentioned = _user_bodies(
            rng, spec, groups, condition_side=False, n_posts=spec.posts_per_user
        )
        truth_rows.append((author, "control", mentioned))
        for j, words in enumerate(bodies):
            # controls live mostly in the medical advice subreddit
            if j < spec.posts_per_user - 1:
                sub = RELEVANT_POOL[0]
            else:
                sub = RELEVANT_POOL[1 + i % (len(RELEVANT_POOL) - 1)]
            kind = "submission" if j % 2 == 0 else "comment"
            posts.append(
                factory.make(author, sub, t0 + j * 3600, words, kind, title="question")
            )

    submissions = [p for p in posts if p.kind == "submission"]
    comments = [p for p in posts if p.kind == "comment"]
    paths = SynthArtifacts(
        out_dir=out,
        submissions=out / "submissions.jsonl",
        comments=out / "comments.jsonl",
        labels=out / "labels.tsv",
        lexicon=out / "lexicon.tsv",
        embeddings=out / "vectors.txt",
        truth_users=out / "truth_users.tsv",
        truth_groups=out / "truth_groups.tsv",
        spec_file=out / "spec.json",
        config=out / "config.ini",
    )
    write_dump(submissions, paths.submissions)
    write_dump(comments, paths.comments)
    _write_labels(spec, paths.labels, report_authors, nonreport_authors)
    _write_lexicon(groups, paths.lexicon)
    _write_vectors(spec, groups, paths.embeddings)
    _write_truth(paths, groups, truth_rows)
    with open(paths.spec_file, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(spec.to_json())
    _write_config(spec, paths.config)
    return paths


def _user_bodies(rng, spec, groups, condition_side: bool, n_posts: int):
    """Filler posts with group mentions spliced in; returns the drawn groups."""
    bodies = [
        _filler(rng, spec.min_words + rng.randrange(20)) for _ in range(n_posts)
    ]
    mentioned: list[int] = []
    for group in groups:
        cond_rate, ctrl_rate = effective_rates(spec, group)
        rate = cond_rate if condition_side else ctrl_rate
        if rng.random() >= rate:
            continue
        mentioned.append(group.group_id)
        phrase = _mention_phrase(rng, spec, group)
        target = bodies[rng.randrange(n_posts)]
        position = rng.randrange(len(target) + 1)
        target[position:position] = phrase.split()
    return bodies, mentioned


def _write_labels(spec, path, report_authors, nonreport_authors):
    """Hand labels: ground truth from labeler ann, a dual-labeled subset from
    ben who disagrees on a fixed number of them."""
    labeled = [(a, 1) for a in report_authors[: spec.n_labeled_report]]
    labeled += [(a, 0) for a in nonreport_authors[: spec.n_labeled_nonreport]]
    dual = labeled[: spec.n_dual_labeled]
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("author\tlabel\tlabeler\n")
        for author, label in labeled:
            handle.write(f"{author}\t{label}\tann\n")
        for idx, (author, label) in enumerate(dual):
            second = 1 - label if idx < spec.n_label_disagreements else label
            handle.write(f"{author}\t{second}\tben\n")


def _write_lexicon(groups, path):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("canonical\tsynonym\tsource\n")
        for group in groups:
            for canonical, synonym in zip(group.canonicals, group.synonyms):
                handle.write(f"{canonical}\t{canonical}\tsynthetic\n")
                handle.write(f"{canonical}\t{synonym}\tsynthetic\n")


def _write_vectors(spec, groups, path):
    """Embeddings: group centers scale*e_g with small per-token jitter, so
    within-group distances stay tiny next to the across-group ones."""
    rng = random.Random(f"{spec.seed}:vectors")

    def jittered(center: list[float]) -> list[float]:
        return [
            c + rng.uniform(-spec.token_jitter, spec.token_jitter) for c in center
        ]

    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for group in groups:
            center = [0.0] * spec.dim
            center[group.group_id % spec.dim] = spec.center_scale
            for canonical, synonym in zip(group.canonicals, group.synonyms):
                cvec = jittered(center)
                svec = jittered(cvec)
                handle.write(canonical + " " + " ".join(repr(x) for x in cvec) + "\n")
                handle.write(synonym + " " + " ".join(repr(x) for x in svec) + "\n")


def _write_truth(paths, groups, truth_rows):
    with open(paths.truth_groups, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("symptom\tgroup_id\tcommon\n")
        for group in groups:
            for canonical in group.canonicals:
                handle.write(f"{canonical}\t{group.group_id}\t{int(group.common)}\n")
    with open(paths.truth_users, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("author\trole\tmentioned_groups\n")
        for author, role, mentioned in truth_rows:
            joined = ";".join(str(g) for g in mentioned)
            handle.write(f"{author}\t{role}\t{joined}\n")


def _write_config(spec, path):
    lines = [
        "[pipeline]",
        f"condition = {spec.condition}",
        f"condition_subreddits = {spec.condition}",
        "submissions = submissions.jsonl",
        "comments = comments.jsonl",
        "labels = labels.tsv",
        "lexicon = lexicon.tsv",
        "embeddings = vectors.txt",
        "output_dir = out",
        f"seed = {spec.seed}",
        "assume_relevant = true",
        "",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("\n".join(lines))
