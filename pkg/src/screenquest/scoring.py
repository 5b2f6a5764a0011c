"""Doctor-facing scoring sheets and the rater validation report.

Each questionnaire path is rendered as one sheet item (the questions along
the path with their answers); half of the paths, rounded down, appear a
second time so intra-rater reliability can be measured. Raters score every
item 1-5 for how likely the patient is to have the condition, or mark it
NEI (not enough information).
"""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from screenquest.metrics import intra_rater, pearson
from screenquest.questionnaire import Questionnaire

NEI = "NEI"
SCORE_MIN = 1
SCORE_MAX = 5
MIN_DUPLICATE_GAP = 2


def parse_score(raw) -> int | str:
    """Normalize a score: an int in [1, 5] or the literal string NEI."""
    if isinstance(raw, str):
        text = raw.strip()
        if text.upper() == NEI:
            return NEI
        if text.lstrip("+-").isdigit():
            raw = int(text)
        else:
            raise ValueError(f"score must be {SCORE_MIN}-{SCORE_MAX} or NEI, got {raw!r}")
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ValueError(f"score must be {SCORE_MIN}-{SCORE_MAX} or NEI, got {raw!r}")
    if not SCORE_MIN <= raw <= SCORE_MAX:
        raise ValueError(f"score must be {SCORE_MIN}-{SCORE_MAX} or NEI, got {raw!r}")
    return raw


@dataclass(frozen=True)
class SheetItem:
    item_id: str
    path_id: str
    steps: tuple[tuple[str, str], ...]  # (question, answer) pairs
    duplicate_of: str | None = None  # item_id of the first showing


@dataclass
class ScoringSheet:
    condition: str
    seed: int
    items: list[SheetItem]

    def duplicate_pairs(self) -> list[tuple[SheetItem, SheetItem]]:
        by_id = {item.item_id: item for item in self.items}
        return [
            (by_id[item.duplicate_of], item)
            for item in self.items
            if item.duplicate_of is not None
        ]

    def first_showings(self) -> list[SheetItem]:
        return [item for item in self.items if item.duplicate_of is None]


def generate_sheet(questionnaire: Questionnaire, seed: int) -> ScoringSheet:
    """Build the randomized sheet for one rater seed.

    Every path appears once and floor(n/2) seeded-sampled paths appear
    twice; the shuffled order keeps each duplicate at least two positions
    away from its first showing. Fewer than two paths cannot make a
    meaningful sheet and raise.
    """
    paths = questionnaire.paths()
    if len(paths) < 2:
        raise ValueError(f"need at least two paths to score, got {len(paths)}")
    rng = random.Random(f"sheet:{seed}")
    leaf_ids = [p.leaf_id for p in paths]
    duplicated = rng.sample(leaf_ids, len(paths) // 2)
    entries: list[tuple[str, bool]] = [(leaf, False) for leaf in leaf_ids]
    entries.extend((leaf, True) for leaf in duplicated)

    for _attempt in range(10000):
        order = rng.sample(entries, len(entries))
        if _duplicates_separated(order):
            break
    else:
        raise RuntimeError("could not separate duplicate items; sheet too small")

    steps_of = {p.leaf_id: tuple((q, a) for q, a in p.steps) for p in paths}
    items: list[SheetItem] = []
    first_item_of: dict[str, str] = {}
    for position, (leaf, _is_dup) in enumerate(order, start=1):
        item_id = f"i{position}"
        previous = first_item_of.get(leaf)
        items.append(
            SheetItem(
                item_id=item_id,
                path_id=leaf,
                steps=steps_of[leaf],
                duplicate_of=previous,
            )
        )
        if previous is None:
            first_item_of[leaf] = item_id
    return ScoringSheet(condition=questionnaire.condition, seed=seed, items=items)


def _duplicates_separated(order: Sequence[tuple[str, bool]]) -> bool:
    seen: dict[str, int] = {}
    for pos, (leaf, _dup) in enumerate(order):
        if leaf in seen and pos - seen[leaf] < MIN_DUPLICATE_GAP:
            return False
        seen[leaf] = pos
    return True


def sheet_to_dict(sheet: ScoringSheet, include_duplicates: bool = True) -> dict:
    items = []
    for item in sheet.items:
        data = {
            "item_id": item.item_id,
            "path_id": item.path_id,
            "steps": [{"question": q, "answer": a} for q, a in item.steps],
        }
        if include_duplicates:
            data["duplicate_of"] = item.duplicate_of
        items.append(data)
    return {"condition": sheet.condition, "seed": sheet.seed, "items": items}


def write_sheet(sheet: ScoringSheet, path, header_comment: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        if header_comment:
            handle.write(f"# {header_comment}\n")
        writer = csv.writer(handle, delimiter="\t", lineterminator="\n")
        writer.writerow(["item_id", "path_id", "duplicate_of", "rendering", "score"])
        for item in sheet.items:
            rendering = " | ".join(f"{q} {a}" for q, a in item.steps) or "(no questions)"
            writer.writerow(
                [item.item_id, item.path_id, item.duplicate_of or "", rendering, ""]
            )


@dataclass(frozen=True)
class ScoreRecord:
    rater: str
    item_id: str
    score: int | str
    timestamp: float = 0.0


def load_score_records(path) -> list[ScoreRecord]:
    """Read scores: TSV with columns rater, item_id, score[, timestamp]."""
    records: list[ScoreRecord] = []
    with open(path, encoding="utf-8") as handle:
        lines = (line for line in handle if not line.startswith("#"))
        reader = csv.DictReader(lines, delimiter="\t")
        if reader.fieldnames is None or not {"rater", "item_id", "score"} <= set(
            reader.fieldnames
        ):
            raise ValueError(f"{path}: expected columns rater, item_id, score")
        for rec in reader:
            raw_ts = (rec.get("timestamp") or "").strip()
            records.append(
                ScoreRecord(
                    rater=rec["rater"],
                    item_id=rec["item_id"],
                    score=parse_score(rec["score"]),
                    timestamp=float(raw_ts) if raw_ts else 0.0,
                )
            )
    return records


@dataclass
class ScoreTable:
    sheet: ScoringSheet
    scores: dict[str, dict[str, int | str]]  # rater -> item_id -> score
    conflicts: list[tuple[str, str]] = field(default_factory=list)

    def raters(self) -> list[str]:
        return sorted(self.scores)


def ingest_scores(sheet: ScoringSheet, records: Iterable[ScoreRecord]) -> ScoreTable:
    """Collate score records against a sheet.

    Unknown item ids are an error listing every offender. When a rater
    scores the same item more than once the latest record wins (by
    timestamp, then file order) and the conflict is flagged.
    """
    known = {item.item_id for item in sheet.items}
    records = list(records)
    unknown = sorted({r.item_id for r in records if r.item_id not in known})
    if unknown:
        raise ValueError("scores reference unknown item ids: " + ", ".join(unknown))
    chosen: dict[tuple[str, str], tuple[float, int, int | str]] = {}
    seen_counts: dict[tuple[str, str], int] = {}
    for order, rec in enumerate(records):
        parse_score(rec.score)  # reject out-of-range values wherever they came from
        key = (rec.rater, rec.item_id)
        seen_counts[key] = seen_counts.get(key, 0) + 1
        stamp = (rec.timestamp, order)
        if key not in chosen or stamp >= (chosen[key][0], chosen[key][1]):
            chosen[key] = (rec.timestamp, order, rec.score)
    scores: dict[str, dict[str, int | str]] = {}
    for (rater, item_id), (_ts, _order, score) in chosen.items():
        scores.setdefault(rater, {})[item_id] = score
    conflicts = sorted(key for key, count in seen_counts.items() if count > 1)
    return ScoreTable(sheet=sheet, scores=scores, conflicts=conflicts)


@dataclass
class RaterSummary:
    rater: str
    n_scored: int
    n_not_enough_info: int
    correlation: float | None
    reliability: float | None


@dataclass
class ValidationReport:
    condition: str
    raters: list[RaterSummary]
    average_correlation: float | None
    average_reliability: float | None
    pooled_correlation: float | None
    conflicts: list[tuple[str, str]]

    def to_dict(self) -> dict:
        return {
            "condition": self.condition,
            "raters": [
                {
                    "rater": r.rater,
                    "n_scored": r.n_scored,
                    "n_not_enough_info": r.n_not_enough_info,
                    "correlation": r.correlation,
                    "reliability": r.reliability,
                }
                for r in self.raters
            ],
            "average_correlation": self.average_correlation,
            "average_reliability": self.average_reliability,
            "pooled_correlation": self.pooled_correlation,
            "conflicts": [list(c) for c in self.conflicts],
        }


def validation_report(questionnaire: Questionnaire, table: ScoreTable) -> ValidationReport:
    """Compare rater scores against the questionnaire's leaf probabilities.

    Per rater: Pearson correlation of first-showing scores with the leaf
    probabilities, and reliability as the correlation between first and
    second showings of the duplicated paths. Headline numbers are the
    unweighted means over raters; the pooled correlation stacks every
    rater's first showings. NEI scores drop out of every correlation.
    """
    prob_of = {p.leaf_id: p.probability for p in questionnaire.paths()}
    firsts = table.sheet.first_showings()
    dup_pairs = table.sheet.duplicate_pairs()

    raters: list[RaterSummary] = []
    pooled_scores: list[float] = []
    pooled_probs: list[float] = []
    for rater in table.raters():
        given = table.scores[rater]
        xs: list[float] = []
        ys: list[float] = []
        for item in firsts:
            score = given.get(item.item_id)
            if isinstance(score, int):
                xs.append(float(score))
                ys.append(prob_of[item.path_id])
        pooled_scores.extend(xs)
        pooled_probs.extend(ys)
        correlation = _maybe(pearson, xs, ys) if len(xs) >= 2 else None
        pairs = [
            (first.path_id, given.get(first.item_id), given.get(dup.item_id))
            for first, dup in dup_pairs
        ]
        reliability = _maybe(intra_rater, pairs)
        raters.append(
            RaterSummary(
                rater=rater,
                n_scored=len(given),
                n_not_enough_info=sum(1 for s in given.values() if s == NEI),
                correlation=correlation,
                reliability=reliability,
            )
        )

    correlations = [r.correlation for r in raters if r.correlation is not None]
    reliabilities = [r.reliability for r in raters if r.reliability is not None]
    return ValidationReport(
        condition=questionnaire.condition,
        raters=raters,
        average_correlation=(sum(correlations) / len(correlations)) if correlations else None,
        average_reliability=(sum(reliabilities) / len(reliabilities)) if reliabilities else None,
        pooled_correlation=(
            _maybe(pearson, pooled_scores, pooled_probs) if len(pooled_scores) >= 2 else None
        ),
        conflicts=list(table.conflicts),
    )


def _maybe(fn, *args):
    try:
        return fn(*args)
    except ValueError:
        return None
