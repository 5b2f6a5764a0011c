import json

import pytest

from screenquest import reports, scoring
from screenquest.scoring import RaterSummary, ValidationReport


def sample_report(conflicts=()):
    return ValidationReport(
        condition="ibs",
        raters=[
            RaterSummary("dr_a", 6, 1, 0.7312, 0.951),
            RaterSummary("dr_b", 6, 0, None, 0.66),
        ],
        average_correlation=0.7312,
        average_reliability=0.8055,
        pooled_correlation=0.701,
        conflicts=list(conflicts),
    )


def test_two_dp_formatting():
    assert reports.two_dp(0.5) == "0.50"
    assert reports.two_dp(0.666) == "0.67"
    assert reports.two_dp(None) == ""
    assert reports.two_dp(-0.125) == "-0.12"


def test_summary_tsv_and_markdown_agree():
    summary = reports.RunSummary(
        condition="ibs", cohort_size=273, control_size=273,
        n_clusters=26, n_symptoms=35,
        classifier_auc=0.94, questionnaire_auc=0.647,
    )
    tsv = reports.summary_tsv([summary])
    lines = tsv.splitlines()
    assert lines[0].split("\t") == list(reports.RunSummary.ROW_FIELDS)
    assert lines[1] == "ibs\t273\t273\t26\t35\t0.94\t0.65"
    md = reports.summary_markdown([summary])
    assert "| ibs | 273 | 273 | 26 | 35 | 0.94 | 0.65 |" in md
    assert md.endswith("\n") and tsv.endswith("\n")


def test_validation_tsv_rows_and_footer():
    tsv = reports.validation_tsv(sample_report())
    lines = tsv.splitlines()
    assert lines[0] == "\t".join(reports.VALIDATION_FIELDS)
    assert lines[1] == "dr_a\t6\t1\t0.73\t0.95"
    assert lines[2] == "dr_b\t6\t0\t\t0.66"
    assert "average_correlation\t0.73" in lines
    assert "average_reliability\t0.81" in lines
    assert "pooled_correlation\t0.70" in lines
    assert not any(line.startswith("conflicting") for line in lines)


def test_validation_tsv_flags_conflicts():
    tsv = reports.validation_tsv(sample_report(conflicts=[("dr_a", "i3")]))
    assert "conflicting_scores\tdr_a:i3" in tsv


def test_validation_markdown_mentions_headline_numbers():
    md = reports.validation_markdown(sample_report(conflicts=[("dr_b", "i1")]))
    assert md.startswith("# Validation: ibs")
    assert "| dr_a | 6 | 1 | 0.73 | 0.95 |" in md
    assert "Average correlation with leaf probabilities: 0.73" in md
    assert "Average intra-rater reliability: 0.81" in md
    assert "Pooled correlation: 0.70" in md
    assert "dr_b/i1" in md


def test_read_sweep_rows_skips_comments(tmp_path):
    path = tmp_path / "sweep.tsv"
    path.write_text(
        "# config_hash=ab\n"
        "k\tauc\tmax_cluster_size\tselected\n"
        "5\t0.81\t4\t\n"
        "6\t0.9\t3\t*\n"
        "7\t0.85\t3\t\n",
        "utf-8",
    )
    rows = reports.read_sweep_rows(path)
    assert [r["k"] for r in rows] == [5, 6, 7]
    assert [r["selected"] for r in rows] == [False, True, False]
    assert rows[1]["auc"] == 0.9 and rows[0]["max_cluster_size"] == 4


def test_sweep_curve_shape_and_empty_error():
    rows = [
        {"k": 5, "auc": 0.8, "max_cluster_size": 4, "selected": False},
        {"k": 6, "auc": 0.9, "max_cluster_size": 3, "selected": True},
    ]
    curve = reports.sweep_curve(rows)
    assert curve["series"] == [{"k": 5, "auc": 0.8}, {"k": 6, "auc": 0.9}]
    assert curve["selected"] == {"k": 6, "auc": 0.9}
    no_mark = reports.sweep_curve(rows[:1])
    assert no_mark["selected"] is None
    with pytest.raises(ValueError, match="no rows"):
        reports.sweep_curve([])


def test_emit_curve_writes_json(tmp_path):
    sweep = tmp_path / "sweep.tsv"
    sweep.write_text(
        "k\tauc\tmax_cluster_size\tselected\n5\t0.8\t4\t\n6\t0.9\t3\t*\n", "utf-8"
    )
    out = tmp_path / "curve.json"
    data = reports.emit_curve(sweep, out)
    assert json.loads(out.read_text()) == data
    assert out.read_text().endswith("\n")

    empty = tmp_path / "empty.tsv"
    empty.write_text("# nothing here\nk\tauc\tmax_cluster_size\tselected\n", "utf-8")
    with pytest.raises(ValueError, match="no rows"):
        reports.emit_curve(empty, tmp_path / "never.json")
    assert not (tmp_path / "never.json").exists()
