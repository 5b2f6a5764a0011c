"""Parse social-media dump files and apply the source-text filters.

Dumps are JSON-lines: one object per submission or comment. Malformed
lines are counted and skipped, but a file that is mostly malformed is
treated as the wrong format and rejected outright.

The filters here define which posts count as evidence about a user:
a post qualifies if it has at least ``min_words`` whitespace-separated
words, sits in an allowed subreddit, and (for users who self-reported a
condition) was written strictly before their first condition-subreddit
post.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator

SUBMISSION_FIELDS = ("id", "author", "subreddit", "created_utc")
MIN_WORDS = 80
SHORTLIST_SIZE = 13
RELEVANCE_SAMPLE_PER_SUBREDDIT = 10
RELEVANCE_QUESTION = (
    "If you had the problem described in the post, would you consult a doctor?"
)


class FormatMismatchError(ValueError):
    """More than half of a dump's lines failed to parse."""


@dataclass(frozen=True)
class Post:
    id: str
    author: str
    subreddit: str
    created_utc: int
    kind: str  # "submission" or "comment"
    title: str = ""
    body: str = ""
    parent_id: str | None = None

    @property
    def text(self) -> str:
        return f"{self.title}\n{self.body}" if self.title else self.body


def word_count(text: str) -> int:
    """Number of whitespace-separated words."""
    return len(text.split())


@dataclass
class ParseStats:
    total_lines: int = 0
    malformed: int = 0
    parsed: int = 0


def parse_dump(path, kind: str, stats: ParseStats | None = None) -> Iterator[Post]:
    """Stream posts from a JSON-lines dump.

    ``kind`` is "submission" or "comment" and controls which text fields
    are read (title/selftext vs body/parent_id). Lines that are not valid
    JSON objects or miss required fields are counted as malformed and
    skipped; if more than half of a non-empty file is malformed, the whole
    file is rejected as a format mismatch.
    """
    if kind not in ("submission", "comment"):
        raise ValueError(f"kind must be 'submission' or 'comment', got {kind!r}")
    stats = stats if stats is not None else ParseStats()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            stats.total_lines += 1
            post = _parse_line(line, kind)
            if post is None:
                stats.malformed += 1
                continue
            stats.parsed += 1
            yield post
    if stats.total_lines and stats.malformed * 2 > stats.total_lines:
        raise FormatMismatchError(
            f"{path}: {stats.malformed} of {stats.total_lines} lines are "
            "malformed; this does not look like a JSON-lines dump of "
            f"{kind}s"
        )


def _parse_line(line: str, kind: str) -> Post | None:
    try:
        raw = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(raw, dict):
        return None
    for fld in SUBMISSION_FIELDS:
        if fld not in raw:
            return None
    if not isinstance(raw["id"], str) or not isinstance(raw["author"], str):
        return None
    if not isinstance(raw["subreddit"], str):
        return None
    created = raw["created_utc"]
    if isinstance(created, str):
        if not created.isdigit():
            return None
        created = int(created)
    if not isinstance(created, int) or isinstance(created, bool) or created <= 0:
        return None
    if kind == "submission":
        title = raw.get("title", "")
        body = raw.get("selftext", "")
        if not isinstance(title, str) or not isinstance(body, str):
            return None
        return Post(
            id=raw["id"], author=raw["author"], subreddit=raw["subreddit"],
            created_utc=created, kind=kind, title=title, body=body,
        )
    body = raw.get("body", "")
    parent = raw.get("parent_id")
    if not isinstance(body, str) or not isinstance(parent, str) or not parent:
        return None
    return Post(
        id=raw["id"], author=raw["author"], subreddit=raw["subreddit"],
        created_utc=created, kind=kind, body=body, parent_id=parent,
    )


def post_to_record(post: Post) -> dict:
    if post.kind == "submission":
        return {
            "id": post.id, "author": post.author, "subreddit": post.subreddit,
            "created_utc": post.created_utc, "title": post.title,
            "selftext": post.body,
        }
    return {
        "id": post.id, "author": post.author, "subreddit": post.subreddit,
        "created_utc": post.created_utc, "body": post.body,
        "parent_id": post.parent_id,
    }


def write_dump(posts: Iterable[Post], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for post in posts:
            handle.write(json.dumps(post_to_record(post), sort_keys=True) + "\n")


@dataclass
class UserRecord:
    author: str
    posts: list[Post] = field(default_factory=list)
    replies_received: int = 0

    def sorted_posts(self) -> list[Post]:
        return sorted(self.posts, key=lambda p: (p.created_utc, p.id))

    def first_condition_time(self, condition_subreddits) -> int | None:
        """Timestamp of the user's earliest post in a condition subreddit."""
        subs = set(condition_subreddits)
        times = [p.created_utc for p in self.posts if p.subreddit in subs]
        return min(times) if times else None


@dataclass
class Corpus:
    posts: list[Post]
    users: dict[str, UserRecord]
    submission_stats: ParseStats
    comment_stats: ParseStats

    @classmethod
    def from_posts(
        cls,
        posts: Iterable[Post],
        submission_stats: ParseStats | None = None,
        comment_stats: ParseStats | None = None,
    ) -> "Corpus":
        posts = list(posts)
        users: dict[str, UserRecord] = {}
        by_id: dict[str, Post] = {}
        for post in posts:
            users.setdefault(post.author, UserRecord(post.author)).posts.append(post)
            by_id[post.id] = post
        # credit a reply to the author of the parent post
        for post in posts:
            if post.kind != "comment" or not post.parent_id:
                continue
            parent = by_id.get(_strip_prefix(post.parent_id))
            if parent is not None and parent.author != post.author:
                users[parent.author].replies_received += 1
        return cls(
            posts=posts,
            users=users,
            submission_stats=submission_stats or ParseStats(),
            comment_stats=comment_stats or ParseStats(),
        )

    @classmethod
    def load(cls, submissions_path=None, comments_path=None) -> "Corpus":
        if submissions_path is None and comments_path is None:
            raise ValueError("need at least one dump file")
        sub_stats = ParseStats()
        com_stats = ParseStats()
        posts: list[Post] = []
        if submissions_path is not None:
            posts.extend(parse_dump(submissions_path, "submission", sub_stats))
        if comments_path is not None:
            posts.extend(parse_dump(comments_path, "comment", com_stats))
        return cls.from_posts(posts, sub_stats, com_stats)


def _strip_prefix(link_id: str) -> str:
    # dump parent ids may carry a type prefix like t3_
    if len(link_id) > 3 and link_id[0] == "t" and link_id[2] == "_":
        return link_id[3:]
    return link_id


def prior_posts(
    user: UserRecord,
    condition_subreddits,
    allowed_subreddits=None,
    min_words: int = MIN_WORDS,
    submissions_only: bool = False,
) -> list[Post]:
    """A user's qualifying posts: long enough, in allowed subreddits, and
    strictly before their first condition-subreddit post.

    Users with no condition-subreddit post contribute every post that
    passes the other filters. ``allowed_subreddits=None`` allows any
    subreddit outside the condition ones.
    """
    cutoff = user.first_condition_time(condition_subreddits)
    condition = set(condition_subreddits)
    allowed = None if allowed_subreddits is None else set(allowed_subreddits)
    out = []
    for post in user.sorted_posts():
        if post.subreddit in condition:
            continue
        if allowed is not None and post.subreddit not in allowed:
            continue
        if submissions_only and post.kind != "submission":
            continue
        if word_count(post.text) < min_words:
            continue
        if cutoff is not None and post.created_utc >= cutoff:
            continue
        out.append(post)
    return out


@dataclass
class ShortlistRow:
    subreddit: str
    distinct_users: int
    relevant: bool | None = None  # None = not yet annotated


@dataclass
class SubredditShortlist:
    rows: list[ShortlistRow]

    def subreddits(self) -> list[str]:
        return [r.subreddit for r in self.rows]


def build_shortlist(
    cohort: Iterable[UserRecord],
    condition_subreddits,
    size: int = SHORTLIST_SIZE,
    min_words: int = MIN_WORDS,
    submissions_only: bool = False,
) -> SubredditShortlist:
    """Top subreddits by how many distinct cohort users posted qualifying
    content there; ties break lexicographically."""
    users_per_sub: dict[str, set[str]] = {}
    for user in cohort:
        for post in prior_posts(
            user, condition_subreddits, None, min_words, submissions_only
        ):
            users_per_sub.setdefault(post.subreddit, set()).add(user.author)
    ranked = sorted(users_per_sub, key=lambda s: (-len(users_per_sub[s]), s))
    return SubredditShortlist(
        rows=[ShortlistRow(s, len(users_per_sub[s])) for s in ranked[:size]]
    )


def write_shortlist(
    shortlist: SubredditShortlist, path, header_comment: str | None = None
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header_comment:
            handle.write(f"# {header_comment}\n")
        handle.write("subreddit\tdistinct_users\trelevant\n")
        for row in shortlist.rows:
            flag = "" if row.relevant is None else ("yes" if row.relevant else "no")
            handle.write(f"{row.subreddit}\t{row.distinct_users}\t{flag}\n")


def read_shortlist(path) -> SubredditShortlist:
    rows: list[ShortlistRow] = []
    with open(path, encoding="utf-8") as handle:
        lines = (line for line in handle if not line.startswith("#"))
        reader = csv.DictReader(lines, delimiter="\t")
        for rec in reader:
            flag = rec.get("relevant", "") or ""
            relevant = None if flag == "" else flag.strip().lower() == "yes"
            rows.append(
                ShortlistRow(rec["subreddit"], int(rec["distinct_users"]), relevant)
            )
    return SubredditShortlist(rows)


@dataclass(frozen=True)
class AnnotationItem:
    subreddit: str
    post_id: str
    text: str


def sample_for_relevance(
    shortlist: SubredditShortlist,
    cohort: Iterable[UserRecord],
    condition_subreddits,
    n_per_subreddit: int = RELEVANCE_SAMPLE_PER_SUBREDDIT,
    seed: int = 0,
    min_words: int = MIN_WORDS,
    submissions_only: bool = False,
) -> list[AnnotationItem]:
    """Sample qualifying posts per shortlisted subreddit for annotators.

    The sample is seeded and drawn from posts sorted by id, so the same
    inputs always produce the same sheet. Subreddits with fewer qualifying
    posts than requested contribute all of them.
    """
    pool: dict[str, list[Post]] = {s: [] for s in shortlist.subreddits()}
    for user in cohort:
        for post in prior_posts(
            user, condition_subreddits, None, min_words, submissions_only
        ):
            if post.subreddit in pool:
                pool[post.subreddit].append(post)
    items: list[AnnotationItem] = []
    for sub in shortlist.subreddits():
        posts = sorted(pool[sub], key=lambda p: p.id)
        rng = random.Random(f"{seed}:{sub}")
        if len(posts) > n_per_subreddit:
            posts = rng.sample(posts, n_per_subreddit)
            posts.sort(key=lambda p: p.id)
        items.extend(
            AnnotationItem(sub, p.id, " ".join(p.text.split())) for p in posts
        )
    return items


def write_annotation_sheet(
    items: list[AnnotationItem], path, header_comment: str | None = None
) -> None:
    """TSV the annotators fill in; the question is answered yes/no per post."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header_comment:
            handle.write(f"# {header_comment}\n")
        handle.write(f"# {RELEVANCE_QUESTION}\n")
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["subreddit", "post_id", "text", "answer"])
        for item in items:
            writer.writerow([item.subreddit, item.post_id, item.text, ""])


def read_annotation_sheet(path) -> dict[str, list[str]]:
    """Answers per subreddit, in file order. Blank answers are kept as ''."""
    answers: dict[str, list[str]] = {}
    with open(path, encoding="utf-8") as handle:
        lines = (line for line in handle if not line.startswith("#"))
        reader = csv.DictReader(lines, delimiter="\t")
        for rec in reader:
            answers.setdefault(rec["subreddit"], []).append(
                (rec.get("answer") or "").strip().lower()
            )
    return answers


def apply_relevance(
    shortlist: SubredditShortlist, answers: dict[str, list[str]]
) -> SubredditShortlist:
    """Mark a subreddit relevant if any sampled post got a 'yes'."""
    for row in shortlist.rows:
        got = answers.get(row.subreddit)
        if not got or all(a == "" for a in got):
            row.relevant = None
            continue
        row.relevant = any(a == "yes" for a in got)
    return shortlist


def relevant_subreddits(
    shortlist: SubredditShortlist, assume_relevant: bool = False
) -> list[str]:
    """Subreddits to treat as medically relevant downstream.

    Unannotated rows are an error unless ``assume_relevant`` marks them
    relevant (useful for fully synthetic corpora).
    """
    missing = [r.subreddit for r in shortlist.rows if r.relevant is None]
    if missing and not assume_relevant:
        raise ValueError(
            "shortlist rows lack relevance annotations: " + ", ".join(missing)
        )
    return [r.subreddit for r in shortlist.rows if r.relevant or (r.relevant is None)]
