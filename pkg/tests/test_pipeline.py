import csv
import io
import json
import logging

import pytest

from screenquest import synth
from screenquest.config import load_config
from screenquest.pipeline import PipelineRun, StageCache, StageError, run_pipeline


def out_files(out_dir):
    return sorted(
        p for p in out_dir.iterdir()
        if p.is_file() and p.suffix in (".tsv", ".json", ".md")
    )


def tiny_corpus(tmp_path, **overrides):
    spec = synth.SynthSpec(
        seed=31, n_condition=16, n_control=16, n_nonreport=6,
        n_labeled_report=10, n_labeled_nonreport=5,
        n_dual_labeled=6, n_label_disagreements=1,
        **overrides,
    )
    artifacts = synth.generate(spec, tmp_path)
    return artifacts, load_config(artifacts.config)


def test_build_writes_every_artifact(small_corpus):
    artifacts, config = small_corpus
    result = run_pipeline(config)
    for name, path in result.artifacts.items():
        assert path.is_file(), name
    assert result.questionnaire.condition == config.condition
    assert result.summary.cohort_size == len(result.cohort_authors)
    assert result.summary.control_size == len(result.control_authors)
    assert set(result.cohort_authors).isdisjoint(result.control_authors)
    assert result.summary.n_clusters == result.questionnaire.k

    stats = json.loads((config.output_dir / "ingest_stats.json").read_text())
    assert stats["submissions"]["malformed"] == 0
    assert stats["comments"]["malformed"] == 0
    assert stats["users"] > 0

    report = json.loads((config.output_dir / "classifier_report.json").read_text())
    for key in ("n_labeled", "n_dual_labeled", "labeler_kappa", "loocv_auc",
                "threshold", "true_positive_rate", "false_positive_rate"):
        assert key in report, key


def test_every_artifact_carries_the_config_hash(small_corpus):
    _, config = small_corpus
    run_pipeline(config)
    expected = config.config_hash()
    for path in out_files(config.output_dir):
        text = path.read_text("utf-8")
        if path.suffix == ".tsv":
            assert text.startswith(f"# config_hash={expected}\n"), path.name
        elif path.suffix == ".json":
            data = json.loads(text)
            if isinstance(data, dict) and "provenance" in data:
                assert data["provenance"]["config_hash"] == expected, path.name
            else:
                assert data.get("config_hash") == expected, path.name


def test_rerun_hits_cache_and_reproduces_bytes(small_corpus, caplog):
    _, config = small_corpus
    run_pipeline(config)
    before = {p.name: p.read_bytes() for p in out_files(config.output_dir)}
    with caplog.at_level(logging.INFO, logger="screenquest.pipeline"):
        run_pipeline(config)
    hits = [r.message for r in caplog.records if "cache hit" in r.message]
    assert any(m.startswith("profiles") for m in hits)
    assert any(m.startswith("distances") for m in hits)
    assert any(m.startswith("sweep") for m in hits)
    after = {p.name: p.read_bytes() for p in out_files(config.output_dir)}
    assert before == after


def test_stage_cache_misses_on_hash_or_missing_output(tmp_path):
    cache = StageCache(tmp_path / "cache")
    output = tmp_path / "thing.tsv"
    output.write_text("x\n", "utf-8")
    cache.store("demo", "aaaa", [output], extra={"selected_k": 4})
    hit = cache.load("demo", "aaaa")
    assert hit is not None and hit["selected_k"] == 4
    assert cache.load("demo", "bbbb") is None
    output.unlink()
    assert cache.load("demo", "aaaa") is None
    cache.manifest_path("demo").write_text("{not json", "utf-8")
    assert cache.load("demo", "aaaa") is None


def test_input_change_invalidates_cache(tmp_path):
    artifacts, config = tiny_corpus(tmp_path)
    run = PipelineRun(config)
    run.distances()
    first = run.input_digest()
    with open(artifacts.embeddings, "a", encoding="utf-8") as handle:
        handle.write("extra " + " ".join("0.0" for _ in range(10)) + "\n")
    fresh = PipelineRun(load_config(artifacts.config))
    assert fresh.input_digest() != first
    assert fresh.cache.load("distances", fresh.input_digest()) is None


def test_stage_error_names_the_failing_stage(tmp_path):
    artifacts, config = tiny_corpus(tmp_path)
    artifacts.embeddings.write_text("short 1.0 2.0\nragged 1.0\n", "utf-8")
    run = PipelineRun(load_config(artifacts.config))
    with pytest.raises(StageError, match="stage 'distances' failed"):
        run.distances()
    try:
        PipelineRun(load_config(artifacts.config)).distances()
    except StageError as err:
        assert err.stage == "distances"
        assert isinstance(err.cause, Exception)


def test_unannotated_shortlist_needs_assume_relevant(tmp_path):
    artifacts, _ = tiny_corpus(tmp_path)
    text = artifacts.config.read_text().replace(
        "assume_relevant = true", "assume_relevant = false"
    )
    artifacts.config.write_text(text, "utf-8")
    config = load_config(artifacts.config)
    run = PipelineRun(config)
    with pytest.raises(StageError, match="lack relevance annotations"):
        run.relevant_subreddits()

    # answering the generated sheet unblocks the run
    sheet = config.output_dir / "annotation_sheet.tsv"
    assert sheet.is_file()
    answered = tmp_path / "relevance.tsv"
    with open(sheet, encoding="utf-8") as handle:
        kept = [ln for ln in handle if not ln.startswith("#")]
    rows = list(csv.reader(io.StringIO("".join(kept)), delimiter="\t"))
    for row in rows[1:]:
        row[-1] = "yes"
    with open(answered, "w", encoding="utf-8", newline="") as handle:
        csv.writer(handle, delimiter="\t", lineterminator="\n").writerows(rows)

    artifacts.config.write_text(text + "relevance = relevance.tsv\n", "utf-8")
    rerun = PipelineRun(load_config(artifacts.config))
    relevant = rerun.relevant_subreddits()
    assert relevant
    assert set(relevant) <= set(synth.RELEVANT_POOL)


def test_cohort_users_without_priors_are_dropped(small_corpus, caplog):
    _, config = small_corpus
    run = PipelineRun(config)
    profile, labels = run.profiles()
    assert set(profile.authors) == set(labels)
    assert set(labels.values()) == {0, 1}
    # every profiled author has at least one mention column possible
    assert profile.matrix.shape == (len(profile.authors), len(profile.symptoms))
