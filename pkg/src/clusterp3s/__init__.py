"""Personalized preprocessing pipeline search for tabular classification.

Features are clustered from learned embeddings and each cluster gets its own
imputer / encoder / scaler triple.
"""
from .learners import LEARNER_KINDS, LearnerSpec, evaluate_L, evaluate_suite
from .prims import PipelineTriple, enumerate_pipelines
from .search import (
    METHODS,
    RunResult,
    SearchConfig,
    heuristic_pipelines,
    run_clusterp3s,
    run_heuristic_p3,
    run_kmeans_variant,
    run_method,
    run_rand_cluster_p3,
)
from .tabular import Table, load_csv, make_folds

__version__ = "0.1.0"
