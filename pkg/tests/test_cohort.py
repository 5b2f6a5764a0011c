import warnings

import numpy as np
import pytest

from screenquest import cohort
from screenquest.corpus import Corpus, Post
from screenquest.symptoms import LexiconEntry, SymptomLexicon


def post(pid, author, sub, t, kind="submission", body="hello there", title=""):
    if kind == "submission":
        return Post(pid, author, sub, t, "submission", title=title, body=body)
    return Post(pid, author, sub, t, "comment", body=body, parent_id="t3_x")


def featurize(posts, vocab=("pain",), condition_subs=("endo",)):
    users = Corpus.from_posts(posts).users
    author = posts[0].author
    return cohort.extract_features(users[author], list(vocab), condition_subs)


def test_build_vocabulary_by_document_frequency():
    texts = ["pain pain pain fatigue", "pain cramps", "cramps"]
    vocab = cohort.build_vocabulary(texts, 2)
    # pain and cramps both appear in 2 documents; repeats inside one
    # document do not count; ties break alphabetically
    assert vocab == ["cramps", "pain"]


def test_build_vocabulary_removes_stopwords():
    vocab = cohort.build_vocabulary(["the pain and the fatigue"], 10)
    assert "the" not in vocab and "and" not in vocab
    assert set(vocab) == {"pain", "fatigue"}


def test_stopword_list_loads():
    stops = cohort.load_stopwords()
    assert "the" in stops and "and" in stops
    assert len(stops) > 50


def test_extract_features_scopes_bow_to_condition_posts():
    posts = [
        post("a", "u", "endo", 10, body="terrible pain today"),
        post("b", "u", "knitting", 11, body="pain free hobby"),
    ]
    features = featurize(posts)
    assert features.bow.tolist() == [1]  # "pain" seen in the endo post
    no_cond = featurize([post("b", "u", "knitting", 11, body="pain")])
    assert no_cond.bow.tolist() == [0]  # non-condition mention does not count


def test_extract_features_link_and_counts():
    posts = [
        post("a", "u", "endo", 10, body="see https://example.com for info"),
        post("b", "u", "books", 11, body="one two three"),
        post("c", "u", "books", 12, kind="comment", body="four five"),
        post("r", "other", "books", 13, kind="comment", body="reply"),
    ]
    posts[3] = Post("r", "other", "books", 13, "comment", body="reply", parent_id="t3_b")
    features = featurize(posts)
    assert features.has_external_link is True
    assert features.n_submissions == 2
    assert features.n_comments == 1
    assert features.n_replies == 1
    assert features.n_words == 4 + 3 + 2
    plain = featurize([post("a", "u", "endo", 10, body="http not a link here")])
    assert plain.has_external_link is False


def labeled_set(n_pos=6, n_neg=6):
    rng = np.random.default_rng(7)
    out = []
    for i in range(n_pos + n_neg):
        positive = i < n_pos
        body = "i was diagnosed with endo" if positive else "question about symptoms"
        posts = [post(f"p{i}", f"u{i:02d}", "endo", 10 + i, body=body)]
        if rng.random() < 0.5:
            posts.append(post(f"q{i}", f"u{i:02d}", "books", 20 + i, body="filler words here"))
        users = Corpus.from_posts(posts).users
        features = cohort.extract_features(users[f"u{i:02d}"], ["diagnosed"], ("endo",))
        out.append((features, positive))
    return out


def test_train_classifier_and_threshold_inclusive():
    labeled = labeled_set()
    model = cohort.train_selfreport_classifier(labeled, ["diagnosed"])
    assert model.loocv_auc == 1.0
    labeling = cohort.label_cohort(model, [f for f, _ in labeled], threshold=0.5)
    assert len(labeling.condition_users) == 6
    # scores exactly at the threshold are included
    at_threshold = cohort.label_cohort(model, [f for f, _ in labeled], threshold=1.0)
    assert len(at_threshold.condition_users) == 6
    with pytest.raises(ValueError):
        cohort.label_cohort(model, [], threshold=1.5)


def test_train_classifier_rejects_degenerate_labels():
    labeled = labeled_set(n_pos=1, n_neg=11)
    with pytest.raises(ValueError, match="degenerate"):
        cohort.train_selfreport_classifier(labeled, ["diagnosed"])


def test_rates_at_threshold():
    labeled = labeled_set()
    model = cohort.train_selfreport_classifier(labeled, ["diagnosed"])
    tpr, fpr = model.rates_at(0.5)
    assert tpr == 1.0 and fpr == 0.0


def test_featurizer_estimator():
    posts = [
        post("a", "u1", "endo", 10, body="pain diagnosed pain"),
        post("b", "u2", "endo", 11, body="diagnosed today"),
    ]
    users = list(Corpus.from_posts(posts).users.values())
    est = cohort.CohortFeaturizer(condition_subreddits=("endo",), vocab_size=2)
    out = est.fit_transform(users)
    assert out.shape == (2, 2 + 1 + len(cohort.COUNT_FEATURES))
    assert est.vocab_ == ["diagnosed", "pain"]
    names = list(est.get_feature_names_out())
    assert names[:3] == ["diagnosed", "pain", "has_external_link"]
    assert est.get_params()["vocab_size"] == 2
    with pytest.raises(ValueError):
        cohort.CohortFeaturizer().transform(users)


def control_lexicon():
    return SymptomLexicon([LexiconEntry("bloating", "bloating"),
                           LexiconEntry("cramps", "cramps")])


def long_body(n=90):
    return " ".join(["word"] * n)


def control_posts(author, n_posts=2, mention="bloating", medical="AskDocs"):
    posts = [post(f"{author}m", author, medical, 10, body=f"{long_body()} {mention}")]
    for j in range(n_posts - 1):
        posts.append(post(f"{author}{j}", author, "dailychat", 20 + j, body=long_body()))
    return posts


def test_select_controls_rules():
    lexicon = control_lexicon()
    posts = []
    posts += control_posts("good")
    posts += control_posts("condposter") + [post("x", "condposter", "endo", 5)]
    posts += control_posts("nomention", mention="unrelated")
    posts += control_posts("wrongsub", medical="dailychat")
    posts += [post("single", "single", "AskDocs", 10, body=f"{long_body()} bloating")]
    users = Corpus.from_posts(posts).users
    selected = cohort.select_controls(
        users, lexicon, ["bloating"],
        relevant_subreddits=["AskDocs", "dailychat"],
        condition_subreddits=["endo"],
    )
    # 'single' has fewer than two posts; the others each break one rule
    assert selected == ["good"]


def test_select_controls_word_floor_counts_relevant_subreddits_only():
    lexicon = control_lexicon()
    thin = [
        post("m", "thin", "AskDocs", 10, body="bloating " + " ".join(["w"] * 30)),
        post("o", "thin", "offtopic", 11, body=long_body(500)),
    ]
    users = Corpus.from_posts(thin).users
    assert cohort.select_controls(
        users, lexicon, ["bloating"],
        relevant_subreddits=["AskDocs"],
        condition_subreddits=["endo"],
    ) == []
    # the same words inside a relevant subreddit clear the floor
    thick = [
        post("m", "thick", "AskDocs", 10, body="bloating " + " ".join(["w"] * 79)),
        post("o", "thick", "offtopic", 11, body="hi"),
    ]
    users = Corpus.from_posts(thick).users
    assert cohort.select_controls(
        users, lexicon, ["bloating"],
        relevant_subreddits=["AskDocs"],
        condition_subreddits=["endo"],
    ) == ["thick"]


def test_load_labels_and_training_labels(tmp_path):
    path = tmp_path / "labels.tsv"
    path.write_text(
        "author\tlabel\tlabeler\n"
        "amy\t1\tann\n"
        "amy\t0\tben\n"
        "zoe\t0\tann\n",
        "utf-8",
    )
    records = cohort.load_labels(path)
    assert len(records) == 3
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        labels = cohort.training_labels(records)
    assert labels == {"amy": 1, "zoe": 0}  # first label wins
    assert any("disagree" in str(w.message) for w in caught)
    firsts, seconds = cohort.dual_label_pairs(records)
    assert firsts == [1] and seconds == [0]


def test_load_labels_rejects_bad_values(tmp_path):
    path = tmp_path / "labels.tsv"
    path.write_text("author\tlabel\tlabeler\namy\t2\tann\n", "utf-8")
    with pytest.raises(ValueError):
        cohort.load_labels(path)
