"""Multi-seed comparisons shared by the experiment scripts and the acceptance suite."""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .learners import LEARNER_KINDS, evaluate_suite
from .search import SearchConfig, run_method
from .tabular import Table


@dataclass
class MethodScores:
    method: str
    suite: list[float] = field(default_factory=list)
    reward: list[float | None] = field(default_factory=list)
    seconds: list[float] = field(default_factory=list)

    @property
    def median_suite(self) -> float:
        return float(np.median(self.suite))

    def to_dict(self) -> dict:
        return {"method": self.method, "suite": self.suite, "reward": self.reward, "seconds": self.seconds,
                "median_suite": self.median_suite}


def suite_score(table: Table, method: str, config: SearchConfig, learners=LEARNER_KINDS) -> tuple[float, float | None, float]:
    """Suite accuracy of the pipeline a method finds, its reward score and wall time."""
    t0 = time.perf_counter()
    run = run_method(method, table, config)
    suite = evaluate_suite(table, run.best.per_feature, learners, config.folds, config.seed, config.onehot_cap)
    return suite.mean_accuracy, run.best.score, time.perf_counter() - t0


def compare_methods(table: Table, methods, seeds, config: SearchConfig | None = None) -> dict[str, MethodScores]:
    config = config or SearchConfig()
    out = {m: MethodScores(m) for m in methods}
    for seed in seeds:
        cfg = replace(config, seed=seed)
        for m in methods:
            s, r, dt = suite_score(table, m, cfg)
            out[m].suite.append(s)
            out[m].reward.append(r)
            out[m].seconds.append(dt)
    return out


def k_sensitivity(table: Table, ks, seeds, config: SearchConfig | None = None) -> dict[int, list[float]]:
    """Suite accuracy of the ClusterP3S result for each K and seed."""
    config = config or SearchConfig()
    return {k: [suite_score(table, "clusterp3s", replace(config, K=k, seed=s))[0] for s in seeds] for k in ks}
