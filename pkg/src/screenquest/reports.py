"""Tabular rendering of pipeline and validation results.

Everything renders to TSV (machine-readable artifact) and markdown (for
humans); numbers are fixed to two decimals so reruns are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from screenquest.scoring import ValidationReport


def two_dp(value: float | None) -> str:
    return "" if value is None else f"{value:.2f}"


@dataclass
class RunSummary:
    """Headline numbers for one condition's pipeline run."""

    condition: str
    cohort_size: int
    control_size: int
    n_clusters: int
    n_symptoms: int
    classifier_auc: float
    questionnaire_auc: float

    ROW_FIELDS = (
        "condition",
        "cohort_size",
        "control_size",
        "clusters",
        "symptoms",
        "classifier_auc",
        "questionnaire_auc",
    )

    def row(self) -> list[str]:
        return [
            self.condition,
            str(self.cohort_size),
            str(self.control_size),
            str(self.n_clusters),
            str(self.n_symptoms),
            two_dp(self.classifier_auc),
            two_dp(self.questionnaire_auc),
        ]


def summary_tsv(summaries: list[RunSummary]) -> str:
    lines = ["\t".join(RunSummary.ROW_FIELDS)]
    lines.extend("\t".join(s.row()) for s in summaries)
    return "\n".join(lines) + "\n"


def summary_markdown(summaries: list[RunSummary]) -> str:
    header = "| " + " | ".join(RunSummary.ROW_FIELDS) + " |"
    rule = "|" + "---|" * len(RunSummary.ROW_FIELDS)
    rows = ["| " + " | ".join(s.row()) + " |" for s in summaries]
    return "\n".join([header, rule, *rows]) + "\n"


VALIDATION_FIELDS = ("rater", "n_scored", "n_not_enough_info", "correlation", "reliability")


def validation_tsv(report: ValidationReport) -> str:
    lines = ["\t".join(VALIDATION_FIELDS)]
    for r in report.raters:
        lines.append(
            "\t".join(
                [
                    r.rater,
                    str(r.n_scored),
                    str(r.n_not_enough_info),
                    two_dp(r.correlation),
                    two_dp(r.reliability),
                ]
            )
        )
    lines.append("")
    lines.append(f"average_correlation\t{two_dp(report.average_correlation)}")
    lines.append(f"average_reliability\t{two_dp(report.average_reliability)}")
    lines.append(f"pooled_correlation\t{two_dp(report.pooled_correlation)}")
    if report.conflicts:
        flagged = ";".join(f"{rater}:{item}" for rater, item in report.conflicts)
        lines.append(f"conflicting_scores\t{flagged}")
    return "\n".join(lines) + "\n"


def validation_markdown(report: ValidationReport) -> str:
    lines = [f"# Validation: {report.condition}", ""]
    lines.append("| " + " | ".join(VALIDATION_FIELDS) + " |")
    lines.append("|" + "---|" * len(VALIDATION_FIELDS))
    for r in report.raters:
        lines.append(
            f"| {r.rater} | {r.n_scored} | {r.n_not_enough_info} "
            f"| {two_dp(r.correlation)} | {two_dp(r.reliability)} |"
        )
    lines.append("")
    lines.append(f"Average correlation with leaf probabilities: {two_dp(report.average_correlation)}")
    lines.append(f"Average intra-rater reliability: {two_dp(report.average_reliability)}")
    lines.append(f"Pooled correlation: {two_dp(report.pooled_correlation)}")
    if report.conflicts:
        lines.append("")
        lines.append(
            "Conflicting submissions (latest kept): "
            + ", ".join(f"{rater}/{item}" for rater, item in report.conflicts)
        )
    return "\n".join(lines) + "\n"


def read_sweep_rows(path) -> list[dict]:
    """Parse a sweep TSV back into row dicts; comment lines are skipped."""
    rows: list[dict] = []
    with open(path, encoding="utf-8") as handle:
        header: list[str] | None = None
        for line in handle:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split("\t")
                continue
            record = dict(zip(header, line.split("\t")))
            rows.append(
                {
                    "k": int(record["k"]),
                    "auc": float(record["auc"]),
                    "max_cluster_size": int(record["max_cluster_size"]),
                    "selected": record.get("selected") == "*",
                }
            )
    return rows


def sweep_curve(rows: list[dict]) -> dict:
    """Plot data for the cluster-count sweep: the (k, AUC) series plus a
    marker record for the selected operating point. Data only, no drawing."""
    if not rows:
        raise ValueError("sweep has no rows")
    series = [{"k": r["k"], "auc": r["auc"]} for r in rows]
    marked = [r["k"] for r in rows if r.get("selected")]
    marker = {"k": marked[0], "auc": next(r["auc"] for r in rows if r["k"] == marked[0])} if marked else None
    return {"series": series, "selected": marker}


def emit_curve(sweep_path, out_path) -> dict:
    """Read a sweep TSV and write its plot data as JSON; returns the data."""
    data = sweep_curve(read_sweep_rows(sweep_path))
    with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return data
