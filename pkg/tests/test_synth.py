import csv
import math
from collections import Counter, defaultdict

import pytest

from screenquest import synth
from screenquest.config import load_config
from screenquest.corpus import ParseStats, parse_dump


def read_tsv(path):
    with open(path, encoding="utf-8") as handle:
        return list(csv.DictReader(handle, delimiter="\t"))


@pytest.fixture(scope="module")
def medium(tmp_path_factory):
    spec = synth.SynthSpec(seed=23, n_condition=500, n_control=500, n_nonreport=30)
    out = tmp_path_factory.mktemp("synth_medium")
    return spec, synth.generate(spec, out)


def test_dumps_parse_with_zero_malformed_lines(medium):
    spec, artifacts = medium
    for path, kind in ((artifacts.submissions, "submission"),
                       (artifacts.comments, "comment")):
        stats = ParseStats()
        posts = list(parse_dump(path, kind, stats))
        assert stats.malformed == 0
        assert stats.parsed == stats.total_lines == len(posts)
        assert all(p.kind == kind for p in posts)
        assert posts


def test_effective_rates_interpolate_with_strength():
    spec = synth.SynthSpec(strength=0.0)
    groups = synth.symptom_groups(spec)
    signal = next(g for g in groups if not g.common)
    common = next(g for g in groups if g.common)
    assert synth.effective_rates(spec, signal) == (spec.base_rate, spec.base_rate)
    assert synth.effective_rates(spec, common) == (spec.common_rate, spec.common_rate)
    full = synth.SynthSpec(strength=1.0)
    assert synth.effective_rates(full, signal) == (1.0, 0.0)
    mid = synth.SynthSpec(strength=0.5, base_rate=0.2)
    cond, ctrl = synth.effective_rates(mid, signal)
    assert cond == pytest.approx(0.6) and ctrl == pytest.approx(0.1)


def test_mention_frequencies_match_planted_rates(medium):
    spec, artifacts = medium
    groups = {g.group_id: g for g in synth.symptom_groups(spec)}
    counts = {"condition": Counter(), "control": Counter()}
    totals = Counter()
    for row in read_tsv(artifacts.truth_users):
        role = row["role"]
        if role not in counts:
            continue
        totals[role] += 1
        for token in row["mentioned_groups"].split(";"):
            if token:
                counts[role][int(token)] += 1
    assert totals["condition"] == 500 and totals["control"] == 500
    for gid, group in groups.items():
        cond_rate, ctrl_rate = synth.effective_rates(spec, group)
        for role, rate in (("condition", cond_rate), ("control", ctrl_rate)):
            n = totals[role]
            observed = counts[role][gid] / n
            # 99.9% binomial bound; the generator is seeded so this is stable
            bound = 3.29 * math.sqrt(max(rate * (1 - rate), 1e-12) / n)
            assert abs(observed - rate) <= bound + 1e-9, (gid, role, observed, rate)


def test_truth_mentions_appear_in_prior_text(medium):
    spec, artifacts = medium
    vocab_of = {
        g.group_id: set(g.canonicals) | set(g.synonyms)
        for g in synth.symptom_groups(spec)
    }
    text = defaultdict(list)
    for path, kind in ((artifacts.submissions, "submission"),
                       (artifacts.comments, "comment")):
        for post in parse_dump(path, kind):
            text[post.author].append(post.text)
    for row in read_tsv(artifacts.truth_users)[:80]:
        words = set(" ".join(text[row["author"]]).split())
        for token in row["mentioned_groups"].split(";"):
            if token:
                assert words & vocab_of[int(token)], (row["author"], token)


def test_truth_groups_table_is_consistent(medium):
    spec, artifacts = medium
    rows = read_tsv(artifacts.truth_groups)
    assert len(rows) == spec.n_groups * spec.members_per_group
    common_ids = {int(r["group_id"]) for r in rows if r["common"] == "1"}
    assert common_ids == set(range(spec.n_common_groups))
    symbols = [r["symptom"] for r in rows]
    assert len(set(symbols)) == len(symbols)


def test_labels_cover_dual_annotation_with_disagreements(medium):
    spec, artifacts = medium
    rows = read_tsv(artifacts.labels)
    ann = [r for r in rows if r["labeler"] == "ann"]
    ben = [r for r in rows if r["labeler"] == "ben"]
    assert len(ann) == spec.n_labeled_report + spec.n_labeled_nonreport
    assert len(ben) == spec.n_dual_labeled
    ann_of = {r["author"]: r["label"] for r in ann}
    flips = sum(1 for r in ben if r["label"] != ann_of[r["author"]])
    assert flips == spec.n_label_disagreements


def test_vectors_cover_lexicon_and_cluster_tightly(medium):
    spec, artifacts = medium
    vectors = {}
    for line in artifacts.embeddings.read_text().splitlines():
        word, *coords = line.split()
        vectors[word] = [float(c) for c in coords]
    lexicon_words = set()
    for row in read_tsv(artifacts.lexicon):
        lexicon_words.add(row["canonical"])
        lexicon_words.add(row["synonym"])
    assert lexicon_words <= set(vectors)
    groups = synth.symptom_groups(spec)

    def dist(a, b):
        return math.dist(vectors[a], vectors[b])

    within = max(
        dist(g.canonicals[0], w)
        for g in groups
        for w in list(g.canonicals[1:]) + list(g.synonyms)
    )
    across = min(
        dist(a.primary, b.primary) for a in groups for b in groups if a is not b
    )
    assert within < across / 10


def test_generation_is_deterministic(tmp_path):
    spec = synth.SynthSpec(seed=5, n_condition=12, n_control=12, n_nonreport=4,
                           n_labeled_report=8, n_labeled_nonreport=3,
                           n_dual_labeled=4, n_label_disagreements=1)
    a = synth.generate(spec, tmp_path / "a")
    b = synth.generate(spec, tmp_path / "b")
    for name in ("submissions", "comments", "labels", "lexicon", "embeddings",
                 "truth_users", "truth_groups", "spec_file", "config"):
        assert getattr(a, name).read_bytes() == getattr(b, name).read_bytes(), name


def test_written_config_loads_and_runs_relevance_free(medium):
    _, artifacts = medium
    config = load_config(artifacts.config)
    assert config.assume_relevant is True
    assert config.condition_subreddits == (config.condition,)
    assert config.submissions == artifacts.submissions


def test_spec_roundtrip_and_validation(tmp_path):
    spec = synth.SynthSpec(seed=3, strength=0.4)
    path = tmp_path / "spec.json"
    path.write_text(spec.to_json(), "utf-8")
    assert synth.SynthSpec.from_json_file(path) == spec
    with pytest.raises(ValueError, match="strength"):
        synth.SynthSpec(strength=1.5)
    with pytest.raises(ValueError, match="common groups"):
        synth.SynthSpec(n_groups=4, n_common_groups=5)
    with pytest.raises(ValueError, match="at least two users"):
        synth.SynthSpec(n_condition=1)
