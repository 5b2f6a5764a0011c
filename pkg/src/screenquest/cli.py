"""Command-line entry points.

Every pipeline stage is a subcommand reading the same declarative config
file, so you can run the whole thing (`build`) or stop after any stage
and inspect its artifacts. Exit codes: 0 success, 2 configuration error,
3 stage failure.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from screenquest import reports, scoring, synth
from screenquest import questionnaire as quest
from screenquest.config import ConfigError, PipelineConfig, derive_seed, load_config
from screenquest.pipeline import PipelineRun, StageError

CONFIG_ERROR = 2
STAGE_ERROR = 3

log = logging.getLogger("screenquest")


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log stage progress to stderr.")
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Upper bound on worker processes for parallel stages.")
def main(verbose: bool, jobs: int) -> None:
    """Build medical screening questionnaires from social-media dumps."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    # all current stages are single-process; the bound is accepted so
    # scripts written against it keep working if a stage gains workers
    if jobs < 1:
        raise click.BadParameter("--jobs must be >= 1")


def _load(config_path: str) -> PipelineConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(CONFIG_ERROR)


def _run_stage(config_path: str, stage: str, after=None) -> None:
    config = _load(config_path)
    run = PipelineRun(config)
    try:
        result = getattr(run, stage)()
    except StageError as exc:
        click.echo(str(exc), err=True)
        sys.exit(STAGE_ERROR)
    if after is not None:
        after(run, result)


config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(exists=True),
    help="Pipeline config file.",
)


@main.command()
@config_option
def ingest(config_path: str) -> None:
    """Parse the dumps and write ingest statistics."""
    _run_stage(config_path, "load_corpus", lambda run, data: click.echo(
        f"{len(data.posts)} posts from {len(data.users)} users "
        f"({data.submission_stats.malformed + data.comment_stats.malformed} malformed lines skipped)"
    ))


@main.command()
@config_option
def cohort(config_path: str) -> None:
    """Train the self-report classifier and label the candidate users."""
    _run_stage(config_path, "label_condition_users", lambda run, labeling: click.echo(
        f"{len(labeling.condition_users)} of {len(labeling.labels)} candidates "
        f"labeled condition at threshold {labeling.threshold}"
    ))


@main.command()
@config_option
def shortlist(config_path: str) -> None:
    """Rank subreddits by cohort activity and write the annotation sheet."""

    def show(run: PipelineRun, result) -> None:
        for row in result.rows:
            mark = {True: "yes", False: "no", None: "?"}[row.relevant]
            click.echo(f"{row.subreddit}\t{row.distinct_users}\t{mark}")

    _run_stage(config_path, "shortlist", show)


@main.command()
@config_option
def controls(config_path: str) -> None:
    """Select control users matched on top cohort symptoms."""
    _run_stage(config_path, "controls", lambda run, selected: click.echo(
        f"{len(selected)} control users"
    ))


@main.command()
@config_option
def profile(config_path: str) -> None:
    """Build symptom mention profiles for cohort and controls."""
    _run_stage(config_path, "profiles", lambda run, result: click.echo(
        f"{len(result[0].authors)} users x {len(result[0].symptoms)} symptoms"
    ))


@main.command()
@config_option
def distances(config_path: str) -> None:
    """Compute word-mover distances between profiled symptoms."""
    _run_stage(config_path, "distances", lambda run, matrix: click.echo(
        f"{len(matrix.labels)} x {len(matrix.labels)} distance matrix"
    ))


@main.command()
@config_option
def sweep(config_path: str) -> None:
    """Score every cluster count and pick the operating point."""

    def show(run: PipelineRun, result) -> None:
        sweep_result, selected_k = result
        entry = sweep_result.entry_for(selected_k)
        click.echo(f"selected k={selected_k} (auc {entry.auc:.3f})")

    _run_stage(config_path, "sweep", show)


@main.command()
@config_option
def build(config_path: str) -> None:
    """Run the full pipeline and write the questionnaire plus reports."""

    def show(run: PipelineRun, result) -> None:
        reports.emit_curve(result.artifacts["sweep.tsv"], run.out / "curve.json")
        click.echo(f"questionnaire: {result.artifacts['questionnaire.json']}")
        click.echo(
            f"cohort {result.summary.cohort_size}, controls {result.summary.control_size}, "
            f"k={result.summary.n_clusters}, auc {result.summary.questionnaire_auc:.3f}"
        )

    _run_stage(config_path, "build", show)


@main.command()
@click.option("--questionnaire", "questionnaire_path", required=True,
              type=click.Path(exists=True), help="Exported questionnaire JSON.")
@click.option("--seed", type=int, required=True, help="Sheet shuffling seed.")
@click.option("--out", "out_path", required=True, type=click.Path(),
              help="Where to write the scoring sheet TSV.")
def sheet(questionnaire_path: str, seed: int, out_path: str) -> None:
    """Generate a rater scoring sheet from an exported questionnaire."""
    built = quest.import_questionnaire(questionnaire_path)
    generated = scoring.generate_sheet(built, seed)
    scoring.write_sheet(generated, out_path)
    click.echo(f"{len(generated.items)} items -> {out_path}")


@main.command()
@click.option("--questionnaire", "questionnaire_path", type=click.Path(exists=True),
              help="Exported questionnaire JSON.")
@click.option("--scores", "scores_path", type=click.Path(exists=True),
              help="Rater scores TSV (rater, item_id, score[, timestamp]).")
@click.option("--seed", type=int, default=None,
              help="Seed of the sheet the scores refer to (defaults to the pipeline sheet seed).")
@click.option("--pipeline-seed", type=int, default=None,
              help="Pipeline seed; the sheet seed is derived from it like `build` does.")
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write TSV here (otherwise markdown goes to stdout).")
@click.option("--curve", "curve_path", type=click.Path(exists=True), default=None,
              help="Emit plot data from this sweep TSV instead of a validation report.")
def report(questionnaire_path, scores_path, seed, pipeline_seed, out_path, curve_path) -> None:
    """Render a validation report from rater scores, or sweep plot data."""
    if curve_path is not None:
        if out_path is None:
            click.echo("config error: --curve needs --out", err=True)
            sys.exit(CONFIG_ERROR)
        data = reports.emit_curve(curve_path, out_path)
        click.echo(f"{len(data['series'])} points -> {out_path}")
        return
    if questionnaire_path is None or scores_path is None:
        click.echo("config error: need --questionnaire and --scores", err=True)
        sys.exit(CONFIG_ERROR)
    if seed is None:
        if pipeline_seed is None:
            click.echo("config error: need --seed or --pipeline-seed", err=True)
            sys.exit(CONFIG_ERROR)
        seed = derive_seed(pipeline_seed, "sheet")
    built = quest.import_questionnaire(questionnaire_path)
    generated = scoring.generate_sheet(built, seed)
    records = scoring.load_score_records(scores_path)
    table = scoring.ingest_scores(generated, records)
    result = scoring.validation_report(built, table)
    if out_path is not None:
        Path(out_path).write_text(reports.validation_tsv(result), "utf-8")
        click.echo(f"report -> {out_path}")
    else:
        click.echo(reports.validation_markdown(result), nl=False)


@main.command()
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False),
              help="Directory of exported questionnaire JSON files.")
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--log", "log_path", required=True, type=click.Path(),
              help="Append-only event log (replayed on startup).")
@click.option("--cors", "cors_origins", multiple=True,
              help="Origin allowed to call the API (repeatable).")
@click.option("--token", "rater_token", default=None,
              help="Static token required on validation endpoints.")
def serve(data_dir, port, host, log_path, cors_origins, rater_token) -> None:
    """Serve questionnaires over HTTP for interactive sessions and scoring."""
    import uvicorn

    from screenquest.service import create_app

    app = create_app(
        data_dir, log_path, cors_origins=cors_origins, rater_token=rater_token
    )
    uvicorn.run(app, host=host, port=port, log_level="info")


@main.command("synth")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Directory for the generated corpus and config.")
@click.option("--seed", type=int, default=None, help="Override the generator seed.")
@click.option("--strength", type=float, default=None,
              help="Override the planted signal strength in [0, 1].")
@click.option("--n-condition", type=int, default=None)
@click.option("--n-control", type=int, default=None)
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None,
              help="JSON file of generator settings (overrides applied on top).")
def synth_cmd(out_dir, seed, strength, n_condition, n_control, spec_path) -> None:
    """Generate a synthetic corpus with a planted symptom signal."""
    settings = {}
    if spec_path is not None:
        settings = json.loads(Path(spec_path).read_text("utf-8"))
    for key, value in (
        ("seed", seed), ("strength", strength),
        ("n_condition", n_condition), ("n_control", n_control),
    ):
        if value is not None:
            settings[key] = value
    try:
        spec = synth.SynthSpec(**settings)
    except (TypeError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(CONFIG_ERROR)
    artifacts = synth.generate(spec, out_dir)
    click.echo(f"corpus -> {artifacts.out_dir} (config: {artifacts.config})")


if __name__ == "__main__":
    main()
