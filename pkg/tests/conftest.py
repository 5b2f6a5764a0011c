import random

import numpy as np
import pytest

from screenquest import synth
from screenquest.cluster import agglomerate
from screenquest.config import load_config
from screenquest.questionnaire import build_questionnaire, select_operating_point, sweep
from screenquest.symptoms import SymptomProfile
from screenquest.wmd import EmbeddingStore


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """A compact planted-signal corpus plus its parsed config."""
    spec = synth.SynthSpec(
        seed=11, n_condition=40, n_control=40, n_nonreport=12,
        n_labeled_report=24, n_labeled_nonreport=10,
    )
    artifacts = synth.generate(spec, tmp_path_factory.mktemp("corpus"))
    return artifacts, load_config(artifacts.config)


@pytest.fixture()
def toy_store():
    """Deterministic random embeddings over a small vocabulary."""
    rng = random.Random(40)
    words = [f"w{i}" for i in range(30)]
    return EmbeddingStore(
        dim=4,
        vectors={w: np.array([rng.uniform(-1, 1) for _ in range(4)]) for w in words},
    )


def random_questionnaire(seed, n_symptoms=12, n_users=60, k_min=3):
    """A questionnaire built from random mentions through the real stack."""
    rng = np.random.default_rng(seed)
    matrix = (rng.random((n_users, n_symptoms)) < 0.4).astype(np.int8)
    labels_arr = rng.integers(0, 2, n_users)
    labels_arr[0], labels_arr[1] = 1, 0  # both classes present
    names = [f"s{i:02d}" for i in range(n_symptoms)]
    authors = [f"u{i:03d}" for i in range(n_users)]
    profile = SymptomProfile(authors=authors, symptoms=names, matrix=matrix)
    base = rng.random((n_symptoms, n_symptoms))
    dist = (base + base.T) / 2
    np.fill_diagonal(dist, 0.0)
    dendrogram = agglomerate(dist)
    labels = {a: int(y) for a, y in zip(authors, labels_arr)}
    result = sweep(profile, labels, dendrogram, k_min=k_min)
    entry = select_operating_point(result, max_cluster_fraction=0.5)
    return build_questionnaire("randcond", entry, names)
