"""Hierarchical pipeline search and its baselines.

The outer loop proposes a feature-to-cluster assignment; the inner loop
randomly samples one pipeline per cluster and scores it by cross-validation.
``run_clusterp3s`` learns the assignment with a policy network updated by
REINFORCE; ``run_rand_cluster_p3`` and ``run_kmeans_variant`` swap in random
and frozen k-means assignments; ``run_heuristic_p3`` is the hand-made pipeline.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .cluster import (
    ARGMAX,
    RANDOM,
    SAMPLED,
    ClusterAssignment,
    PolicyNet,
    RewardState,
    kmeans,
    pretrain_policy,
    reinforce_update,
    sample_assignment,
)
from .embed import embed_table
from .learners import LEARNER_KINDS, TREE, Evaluator, LearnerSpec
from .prims import (
    DEFAULT_ONEHOT_CAP,
    ENCODERS,
    IMPUTERS,
    SCALERS,
    InvalidPrimitive,
    PipelineTriple,
    SearchSpace,
    table_column_classes,
)
from .tabular import NUMERIC, Table, column_profile, make_folds

log = logging.getLogger(__name__)

METHODS = ("clusterp3s", "heuristic", "randcluster", "kmeans-variant")


class NoValidPipeline(RuntimeError):
    pass


@dataclass
class SearchConfig:
    K: int = 5
    outer_iters: int = 50
    inner_iters: int = 10
    seed: int = 0
    reward_learner: str = TREE
    folds: int = 10
    onehot_cap: int = DEFAULT_ONEHOT_CAP
    ae_epochs: int = 100
    pretrain_epochs: int = 200
    vocab_cap: int = 2048
    quantize_digits: int = 4
    imputers: tuple[str, ...] = IMPUTERS
    encoders: tuple[str, ...] = ENCODERS
    scalers: tuple[str, ...] = SCALERS
    workers: int = 1

    def triples(self) -> list[PipelineTriple]:
        return [
            PipelineTriple(i, e, s)
            for i in IMPUTERS if i in self.imputers
            for e in ENCODERS if e in self.encoders
            for s in SCALERS if s in self.scalers
        ]

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("imputers", "encoders", "scalers"):
            d[key] = list(d[key])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SearchConfig:
        d = dict(d)
        for key in ("imputers", "encoders", "scalers"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class TrialRecord:
    outer_iter: int
    inner_iter: int
    assignment: tuple[int, ...] | None
    pipelines: list[PipelineTriple]
    score: float | None
    wall_time: float
    phase: str = "search"
    invalid: dict | None = None

    @property
    def valid(self) -> bool:
        return self.score is not None

    def per_feature(self) -> list[PipelineTriple]:
        if self.assignment is None:
            return list(self.pipelines)
        return [self.pipelines[c - 1] for c in self.assignment]

    def to_dict(self) -> dict:
        return {
            "outer_iter": self.outer_iter,
            "inner_iter": self.inner_iter,
            "phase": self.phase,
            "assignment": None if self.assignment is None else list(self.assignment),
            "pipelines": [p.to_dict() for p in self.pipelines],
            "score": self.score,
            "invalid": self.invalid,
            "wall_time": self.wall_time,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TrialRecord:
        return cls(
            outer_iter=int(d["outer_iter"]),
            inner_iter=int(d["inner_iter"]),
            assignment=None if d["assignment"] is None else tuple(d["assignment"]),
            pipelines=[PipelineTriple.from_dict(p) for p in d["pipelines"]],
            score=d["score"],
            wall_time=float(d["wall_time"]),
            phase=d.get("phase", "search"),
            invalid=d.get("invalid"),
        )


@dataclass
class Best:
    per_feature: list[PipelineTriple]
    score: float | None
    assignment: tuple[int, ...] | None = None
    pipelines: list[PipelineTriple] | None = None
    source: str = "search"

    def to_dict(self, feature_names) -> dict:
        return {
            "score": self.score,
            "source": self.source,
            "assignment": None if self.assignment is None else dict(zip(feature_names, self.assignment)),
            "pipelines": None if self.pipelines is None else {
                str(k + 1): p.to_dict() for k, p in enumerate(self.pipelines)
            },
            "per_feature": {n: p.to_dict() for n, p in zip(feature_names, self.per_feature)},
        }


@dataclass
class RunResult:
    method: str
    config: SearchConfig
    feature_names: list[str]
    column_classes: list[str]
    best: Best
    trials: list[TrialRecord]
    learning_curve: list[float | None]
    curve_times: list[float]
    K_effective: int | None = None
    warnings: list[str] = field(default_factory=list)
    embedding: np.ndarray | None = None

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def iterations(self) -> int:
        return len(self.learning_curve)

    def result_dict(self) -> dict:
        """Everything except wall-clock data, so seed-pinned reruns are byte-identical."""
        return {
            "method": self.method,
            "seed": self.seed,
            "config": self.config.to_dict(),
            "feature_names": self.feature_names,
            "column_classes": self.column_classes,
            "K_effective": self.K_effective,
            "best": self.best.to_dict(self.feature_names),
            "iterations": self.iterations,
            "n_trials": len(self.trials),
            "n_valid_trials": sum(t.valid for t in self.trials),
            "learning_curve": self.learning_curve,
            "warnings": self.warnings,
        }


def result_json(run: RunResult) -> str:
    return json.dumps(run.result_dict(), indent=2, sort_keys=True) + "\n"


def write_run_dir(run: RunResult, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "result.json").write_text(result_json(run))
    with open(out / "trials.jsonl", "w") as fh:
        for t in run.trials:
            fh.write(json.dumps(t.to_dict(), sort_keys=True) + "\n")
    with open(out / "curve.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["outer_iter", "best_score", "wall_time"])
        for i, (s, t) in enumerate(zip(run.learning_curve, run.curve_times)):
            w.writerow([i, "" if s is None else repr(s), f"{t:.4f}"])
    return out


# ---------------------------------------------------------------------------
# heuristic pipeline


def heuristic_pipelines(table: Table, onehot_cap: int = DEFAULT_ONEHOT_CAP) -> list[PipelineTriple]:
    """Mean-impute + MaxAbs for numeric columns, most-frequent-impute + one-hot otherwise.

    Imputers only appear when the column has missing cells. All-missing
    columns skip imputation, and text columns above the one-hot cap fall
    back to ordinal encoding.
    """
    out = []
    for col in table.columns:
        prof = column_profile(col)
        has_missing = prof.missing_count > 0
        if prof.missing_count == col.n_rows:
            out.append(PipelineTriple("None", "OneHot", "None"))
        elif col.kind == NUMERIC:
            out.append(PipelineTriple("Mean" if has_missing else "None", "None", "MaxAbs"))
        else:
            enc = "OneHot" if prof.cardinality + has_missing <= onehot_cap else "Ordinal"
            out.append(PipelineTriple("MostFrequentValue" if has_missing else "None", enc, "None"))
    return out


# ---------------------------------------------------------------------------
# shared search machinery


class _Search:
    def __init__(self, table: Table, config: SearchConfig, method: str):
        self.table = table
        self.config = config
        self.method = method
        self.t0 = time.perf_counter()
        self.classes = table_column_classes(table, config.onehot_cap)
        self.space = SearchSpace(config.triples())
        self.folds = make_folds(table, config.folds, config.seed)
        self.evaluator = Evaluator(table, self.folds, config.onehot_cap)
        self.learner = LearnerSpec(config.reward_learner, config.seed)
        self.trials: list[TrialRecord] = []
        self.curve: list[float | None] = []
        self.curve_times: list[float] = []
        self.best: TrialRecord | None = None
        self.warnings: list[str] = []
        self.K_eff = self.effective_k()

    def warn(self, msg: str) -> None:
        self.warnings.append(msg)
        warnings.warn(msg, stacklevel=3)

    def effective_k(self) -> int:
        K, D = self.config.K, self.table.n_features
        if K < 1:
            raise ValueError(f"K={K} must be >= 1")
        if K > D:
            self.warn(f"K={K} exceeds the {D} features; using K={D}")
            return D
        return K

    def _sample_pipelines(self, assignment: ClusterAssignment, rng: np.random.Generator) -> list[PipelineTriple]:
        pipelines = []
        for k in range(1, assignment.K + 1):
            members = assignment.members(k)
            cands = self.space.candidates({self.classes[j] for j in members})
            if not cands:
                blocked = sorted({self.classes[j] for j in members})
                raise NoValidPipeline(
                    f"no pipeline left for cluster {k} with column classes {blocked}; "
                    f"memo: {sorted(self.space.invalid_memo)}"
                )
            pipelines.append(cands[int(rng.integers(len(cands)))])
        return pipelines

    def _evaluate(self, assignment: ClusterAssignment | None, pipelines, outer: int, inner: int, phase: str) -> TrialRecord:
        start = time.perf_counter()
        labels = None if assignment is None else assignment.labels
        per_feature = pipelines if labels is None else [pipelines[c - 1] for c in labels]
        invalid = None
        try:
            score = self.evaluator.evaluate(per_feature, self.learner).mean_accuracy
        except InvalidPrimitive as err:
            score = None
            self.space.record(err.primitive, err.column_class)
            invalid = {"primitive": list(err.primitive), "column_class": err.column_class, "feature": err.feature}
        return TrialRecord(outer, inner, labels, list(pipelines), score, time.perf_counter() - start, phase, invalid)

    def _accept(self, trial: TrialRecord) -> None:
        self.trials.append(trial)
        if trial.valid and (self.best is None or trial.score > self.best.score):
            self.best = trial

    def inner_search(self, assignment: ClusterAssignment, outer: int, phase: str = "search") -> float | None:
        """Random search over per-cluster pipelines; returns this loop's best score."""
        seed = self.config.seed
        best = None
        workers = max(1, self.config.workers)
        i = 0
        while i < self.config.inner_iters:
            batch = range(i, min(i + workers, self.config.inner_iters))
            # one RNG stream per (outer, inner) index
            sampled = [
                (j, self._sample_pipelines(assignment, np.random.default_rng([seed, outer, j, 1])))
                for j in batch
            ]
            if workers == 1:
                trials = [self._evaluate(assignment, p, outer, j, phase) for j, p in sampled]
            else:
                with ThreadPoolExecutor(workers) as pool:
                    trials = list(pool.map(lambda jp: self._evaluate(assignment, jp[1], outer, jp[0], phase), sampled))
            for trial in trials:
                self._accept(trial)
                if trial.valid and (best is None or trial.score > best):
                    best = trial.score
            i += len(batch)
        return best

    def close_outer(self) -> None:
        self.curve.append(None if self.best is None else self.best.score)
        self.curve_times.append(time.perf_counter() - self.t0)

    def result(self, embedding=None) -> RunResult:
        if self.best is None:
            if self.config.outer_iters > 0:
                self.warn("every trial was invalid; returning the heuristic pipeline")
            best = Best(heuristic_pipelines(self.table, self.config.onehot_cap), None, source="heuristic-fallback")
        else:
            t = self.best
            best = Best(t.per_feature(), t.score, t.assignment, list(t.pipelines),
                        source="argmax" if t.phase == "argmax" else "search")
        return RunResult(
            method=self.method,
            config=self.config,
            feature_names=self.table.feature_names,
            column_classes=self.classes,
            best=best,
            trials=self.trials,
            learning_curve=self.curve,
            curve_times=self.curve_times,
            K_effective=self.K_eff,
            warnings=self.warnings,
            embedding=embedding,
        )


def _embedding(table: Table, config: SearchConfig) -> np.ndarray:
    _, ae = embed_table(table, seed=config.seed, epochs=config.ae_epochs,
                        vocab_cap=config.vocab_cap, quantize_digits=config.quantize_digits)
    return ae.condensed


def run_clusterp3s(table: Table, config: SearchConfig | None = None) -> RunResult:
    """Policy-learned clusters (outer loop) with per-cluster random search (inner loop)."""
    config = config or SearchConfig()
    s = _Search(table, config, "clusterp3s")
    if config.outer_iters == 0:
        return s.result()
    emb = _embedding(table, config)
    pseudo = kmeans(emb, s.K_eff, seed=config.seed)
    policy = PolicyNet.create(emb.shape[1], s.K_eff, seed=config.seed)
    pretrain_policy(policy, emb, pseudo, epochs=config.pretrain_epochs)
    rewards = RewardState()
    for outer in range(config.outer_iters):
        assignment = sample_assignment(policy, emb, np.random.default_rng([config.seed, outer, 0]), SAMPLED)
        best = s.inner_search(assignment, outer)
        if best is not None:
            reinforce_update(policy, emb, assignment, rewards, best)
        s.close_outer()
    # the policy's mode gets its own inner search; the overall best trial wins
    final = sample_assignment(policy, emb, None, ARGMAX)
    s.inner_search(final, config.outer_iters, phase="argmax")
    s.close_outer()
    return s.result(emb)


def run_rand_cluster_p3(table: Table, config: SearchConfig | None = None) -> RunResult:
    """Same inner search, but each outer iteration draws a uniform random assignment."""
    config = config or SearchConfig()
    s = _Search(table, config, "randcluster")
    D = table.n_features
    for outer in range(config.outer_iters):
        rng = np.random.default_rng([config.seed, outer, 0])
        assignment = ClusterAssignment.from_zero_based(rng.integers(0, s.K_eff, size=D), s.K_eff, RANDOM)
        s.inner_search(assignment, outer)
        s.close_outer()
    return s.result()


def run_kmeans_variant(table: Table, config: SearchConfig | None = None) -> RunResult:
    """Clusters frozen to k-means on the embeddings for the whole search."""
    config = config or SearchConfig()
    s = _Search(table, config, "kmeans-variant")
    if config.outer_iters == 0:
        return s.result()
    emb = _embedding(table, config)
    assignment = kmeans(emb, s.K_eff, seed=config.seed)
    for outer in range(config.outer_iters):
        s.inner_search(assignment, outer)
        s.close_outer()
    return s.result(emb)


def run_heuristic_p3(table: Table, config: SearchConfig | None = None) -> RunResult:
    """Single evaluation of the hand-made pipeline; no search."""
    config = config or SearchConfig()
    s = _Search(table, config, "heuristic")
    trial = s._evaluate(None, heuristic_pipelines(table, config.onehot_cap), 0, 0, "heuristic")
    s._accept(trial)
    s.close_outer()
    run = s.result()
    if trial.valid:
        run.best.source = "heuristic"
    return run


RUNNERS = {
    "clusterp3s": run_clusterp3s,
    "heuristic": run_heuristic_p3,
    "randcluster": run_rand_cluster_p3,
    "kmeans-variant": run_kmeans_variant,
}


def run_method(method: str, table: Table, config: SearchConfig | None = None) -> RunResult:
    try:
        runner = RUNNERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}") from None
    return runner(table, config)


# ---------------------------------------------------------------------------
# run directory loading


class RunDirError(ValueError):
    pass


def load_trials(path: str | Path) -> list[TrialRecord]:
    trials = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                trials.append(TrialRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
                raise RunDirError(f"{path}: bad trial record on line {lineno}: {err}") from None
    return trials


def load_curve(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def embedding_csv(emb: np.ndarray, feature_names) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature"] + [f"h{i}" for i in range(emb.shape[1])])
    for name, row in zip(feature_names, emb):
        w.writerow([name] + [repr(float(v)) for v in row])
    return buf.getvalue()


__all__ = [
    "METHODS",
    "LEARNER_KINDS",
    "NoValidPipeline",
    "RunResult",
    "SearchConfig",
    "TrialRecord",
    "heuristic_pipelines",
    "run_clusterp3s",
    "run_heuristic_p3",
    "run_kmeans_variant",
    "run_method",
    "run_rand_cluster_p3",
    "write_run_dir",
]
