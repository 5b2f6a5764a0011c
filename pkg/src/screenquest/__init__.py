"""screenquest: build medical screening questionnaires from social-media dumps.

The pipeline identifies a condition cohort from self-reports, matches a
control group, profiles symptom mentions, clusters symptoms by word-mover
distance, induces a shallow decision tree over the clusters, and renders it
as a questionnaire that doctors can score.
"""

__version__ = "0.1.0"

from screenquest.cluster import PairwiseAgglomerative
from screenquest.cohort import CohortFeaturizer
from screenquest.symptoms import SymptomVectorizer
from screenquest.tree import ScreeningTreeClassifier

__all__ = [
    "CohortFeaturizer",
    "PairwiseAgglomerative",
    "ScreeningTreeClassifier",
    "SymptomVectorizer",
    "__version__",
]
