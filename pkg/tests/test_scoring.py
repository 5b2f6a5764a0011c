import random

import pytest

from screenquest import scoring
from screenquest.cluster import Partition
from screenquest.questionnaire import SweepEntry, build_questionnaire
from screenquest.tree import tree_from_dict

from oracles import pearson_direct


def leaf(n_condition, n_control):
    return {"kind": "leaf", "n_condition": n_condition, "n_control": n_control}


def split(feature, yes, no):
    counts = {
        "n_condition": yes["n_condition"] + no["n_condition"],
        "n_control": yes["n_control"] + no["n_control"],
    }
    return {"kind": "question", "feature": feature, "yes": yes, "no": no, **counts}


def make_questionnaire(tree_dict, names=("alpha", "beta")):
    root = tree_from_dict(tree_dict)
    entry = SweepEntry(
        k=len(names), auc=1.0, max_cluster_size=1,
        partition=Partition(
            k=len(names),
            labels=list(range(len(names))),
            members=[[i] for i in range(len(names))],
        ),
        root=root,
    )
    return build_questionnaire("testcond", entry, list(names))


def four_leaf():
    return make_questionnaire(
        split(0,
              split(1, leaf(3, 0), leaf(1, 3)),
              split(1, leaf(1, 1), leaf(0, 2)))
    )


def three_leaf():
    return make_questionnaire(
        split(0, leaf(2, 0), split(1, leaf(1, 1), leaf(0, 2)))
    )


def test_parse_score_accepts_ints_and_nei():
    assert scoring.parse_score(3) == 3
    assert scoring.parse_score("5") == 5
    assert scoring.parse_score(" nei ") == "NEI"
    assert scoring.parse_score("NEI") == "NEI"
    for bad in (0, 6, -1, "3.5", "six", True, None, 2.0):
        with pytest.raises(ValueError):
            scoring.parse_score(bad)


def test_sheet_size_adds_floor_half_duplicates():
    sheet4 = scoring.generate_sheet(four_leaf(), seed=1)
    assert len(sheet4.items) == 6
    assert len(sheet4.duplicate_pairs()) == 2
    sheet3 = scoring.generate_sheet(three_leaf(), seed=1)
    assert len(sheet3.items) == 4
    assert len(sheet3.duplicate_pairs()) == 1
    assert len(sheet3.first_showings()) == 3


def test_sheet_needs_two_paths():
    lone = make_questionnaire(leaf(3, 1))
    with pytest.raises(ValueError, match="at least two paths"):
        scoring.generate_sheet(lone, seed=1)


def test_duplicates_kept_apart_and_render_identically():
    rng = random.Random(17)
    for _ in range(50):
        sheet = scoring.generate_sheet(four_leaf(), seed=rng.randrange(10**6))
        position = {item.item_id: i for i, item in enumerate(sheet.items)}
        for first, dup in sheet.duplicate_pairs():
            assert position[dup.item_id] - position[first.item_id] >= 2
            assert dup.steps == first.steps
            assert dup.path_id == first.path_id


def test_sheet_determinism_across_calls():
    a = scoring.generate_sheet(four_leaf(), seed=9)
    b = scoring.generate_sheet(four_leaf(), seed=9)
    assert scoring.sheet_to_dict(a) == scoring.sheet_to_dict(b)
    c = scoring.generate_sheet(four_leaf(), seed=10)
    assert [i.path_id for i in c.items] != [i.path_id for i in a.items] or (
        scoring.sheet_to_dict(c) != scoring.sheet_to_dict(a)
    )


def test_sheet_to_dict_can_hide_duplicates():
    sheet = scoring.generate_sheet(four_leaf(), seed=2)
    shown = scoring.sheet_to_dict(sheet)
    hidden = scoring.sheet_to_dict(sheet, include_duplicates=False)
    assert all("duplicate_of" in item for item in shown["items"])
    assert all("duplicate_of" not in item for item in hidden["items"])


def test_write_and_load_scores_roundtrip(tmp_path):
    sheet = scoring.generate_sheet(four_leaf(), seed=3)
    sheet_path = tmp_path / "sheet.tsv"
    scoring.write_sheet(sheet, sheet_path, header_comment="config_hash=ff")
    text = sheet_path.read_text()
    assert text.startswith("# config_hash=ff\n")
    assert "item_id\tpath_id\tduplicate_of\trendering\tscore" in text

    score_path = tmp_path / "scores.tsv"
    rows = ["# config_hash=ff", "rater\titem_id\tscore\ttimestamp"]
    rows += [f"dr_a\t{item.item_id}\t3\t1.5" for item in sheet.items]
    rows += ["dr_a\ti1\tNEI\t2.5"]
    score_path.write_text("\n".join(rows) + "\n", "utf-8")
    records = scoring.load_score_records(score_path)
    assert len(records) == len(sheet.items) + 1
    assert records[-1].score == "NEI"
    assert records[0].timestamp == 1.5

    bad = tmp_path / "bad.tsv"
    bad.write_text("who\tscore\nx\t3\n", "utf-8")
    with pytest.raises(ValueError, match="expected columns"):
        scoring.load_score_records(bad)


def test_ingest_latest_record_wins_and_flags_conflict():
    sheet = scoring.generate_sheet(four_leaf(), seed=4)
    ids = [item.item_id for item in sheet.items]
    records = [scoring.ScoreRecord("dr_a", i, 2, timestamp=1.0) for i in ids]
    records.append(scoring.ScoreRecord("dr_a", ids[0], 5, timestamp=9.0))
    records.append(scoring.ScoreRecord("dr_a", ids[1], 4, timestamp=1.0))
    table = scoring.ingest_scores(sheet, records)
    assert table.scores["dr_a"][ids[0]] == 5  # newer timestamp
    assert table.scores["dr_a"][ids[1]] == 4  # same stamp, later in file
    assert set(table.conflicts) == {("dr_a", ids[0]), ("dr_a", ids[1])}
    assert table.raters() == ["dr_a"]


def test_ingest_rejects_unknown_items_listing_all():
    sheet = scoring.generate_sheet(four_leaf(), seed=4)
    records = [
        scoring.ScoreRecord("dr_a", "zz", 2),
        scoring.ScoreRecord("dr_a", "aa", 2),
        scoring.ScoreRecord("dr_a", sheet.items[0].item_id, 2),
    ]
    with pytest.raises(ValueError) as err:
        scoring.ingest_scores(sheet, records)
    assert "aa" in str(err.value) and "zz" in str(err.value)


def scored_table(questionnaire, sheet, score_by_path, extra=()):
    """One rater scoring each item by its path, duplicates included."""
    records = [
        scoring.ScoreRecord("dr_a", item.item_id, score_by_path[item.path_id])
        for item in sheet.items
    ]
    records.extend(extra)
    return scoring.ingest_scores(sheet, records)


def test_validation_report_matches_hand_computation():
    q = four_leaf()
    sheet = scoring.generate_sheet(q, seed=5)
    prob_of = {p.leaf_id: p.probability for p in q.paths()}
    # score tracks probability imperfectly: 1..4 by probability rank
    ranked = sorted(prob_of, key=prob_of.get)
    score_by_path = {leaf_id: rank + 1 for rank, leaf_id in enumerate(ranked)}
    score_by_path[ranked[0]], score_by_path[ranked[1]] = (
        score_by_path[ranked[1]], score_by_path[ranked[0]],
    )
    table = scored_table(q, sheet, score_by_path)
    report = scoring.validation_report(q, table)

    xs = [float(score_by_path[i.path_id]) for i in sheet.first_showings()]
    ys = [prob_of[i.path_id] for i in sheet.first_showings()]
    expected = pearson_direct(xs, ys)
    (summary,) = report.raters
    assert summary.rater == "dr_a"
    assert summary.n_scored == len(sheet.items)
    assert summary.n_not_enough_info == 0
    assert summary.correlation == pytest.approx(expected, abs=1e-12)
    assert summary.reliability == pytest.approx(1.0, abs=1e-12)
    assert report.average_correlation == pytest.approx(expected, abs=1e-12)
    assert report.pooled_correlation == pytest.approx(expected, abs=1e-12)
    assert report.conflicts == []


def test_validation_report_drops_nei_everywhere():
    q = four_leaf()
    sheet = scoring.generate_sheet(q, seed=6)
    prob_of = {p.leaf_id: p.probability for p in q.paths()}
    ranked = sorted(prob_of, key=prob_of.get)
    score_by_path = {leaf_id: rank + 1 for rank, leaf_id in enumerate(ranked)}
    table = scored_table(q, sheet, score_by_path)
    # overwrite one first showing and one duplicate with NEI
    firsts = sheet.first_showings()
    dup_pairs = sheet.duplicate_pairs()
    nei_first = firsts[0].item_id
    nei_dup = dup_pairs[0][1].item_id
    table.scores["dr_a"][nei_first] = "NEI"
    table.scores["dr_a"][nei_dup] = "NEI"
    report = scoring.validation_report(q, table)
    (summary,) = report.raters
    assert summary.n_not_enough_info == 2 - (nei_first == nei_dup)

    xs = [float(score_by_path[i.path_id]) for i in firsts if i.item_id != nei_first]
    ys = [prob_of[i.path_id] for i in firsts if i.item_id != nei_first]
    assert summary.correlation == pytest.approx(pearson_direct(xs, ys), abs=1e-12)
    # one duplicate pair dropped leaves a single usable pair: no reliability
    assert summary.reliability is None


def test_validation_report_averages_over_raters():
    q = four_leaf()
    sheet = scoring.generate_sheet(q, seed=7)
    prob_of = {p.leaf_id: p.probability for p in q.paths()}
    ranked = sorted(prob_of, key=prob_of.get)
    up = {leaf_id: rank + 1 for rank, leaf_id in enumerate(ranked)}
    down = {leaf_id: 4 - rank for rank, leaf_id in enumerate(ranked)}
    records = [
        scoring.ScoreRecord("dr_up", item.item_id, up[item.path_id])
        for item in sheet.items
    ] + [
        scoring.ScoreRecord("dr_down", item.item_id, down[item.path_id])
        for item in sheet.items
    ]
    report = scoring.validation_report(q, scoring.ingest_scores(sheet, records))
    by_name = {r.rater: r for r in report.raters}
    assert by_name["dr_up"].correlation > 0.9
    assert by_name["dr_down"].correlation < -0.9
    assert report.average_correlation == pytest.approx(
        (by_name["dr_up"].correlation + by_name["dr_down"].correlation) / 2, abs=1e-12
    )
    assert report.average_reliability == pytest.approx(1.0, abs=1e-12)
