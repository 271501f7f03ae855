"""Downstream classifiers and the cross-validated accuracy functional.

Three learners, all deterministic given a seed:

* ``LogisticSGD``: multinomial logistic regression, per-sample SGD.
* ``DecisionTree``: CART with Gini impurity on binned feature values.
* ``RandomForestLite``: bagged CART trees with sqrt feature subsampling, majority vote.

The inner loops are compiled with numba.
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .prims import (
    DEFAULT_ONEHOT_CAP,
    InvalidPrimitive,
    PipelineTriple,
    fit_triple,
    table_column_classes,
    transform_column,
)
from .tabular import FoldPlan, Table, make_folds

LOGISTIC = "LogisticSGD"
TREE = "DecisionTree"
FOREST = "RandomForestLite"
LEARNER_KINDS = (LOGISTIC, TREE, FOREST)

DEFAULT_HYPERPARAMS = {
    LOGISTIC: {"epochs": 200, "lr": 0.01, "l2": 1e-4},
    TREE: {"max_depth": 8, "min_leaf": 2, "max_bins": 256},
    FOREST: {"n_trees": 25, "max_depth": 8, "min_leaf": 2, "max_bins": 256},
}


class DegenerateTraining(ValueError):
    pass


@dataclass(frozen=True)
class LearnerSpec:
    kind: str = TREE
    seed: int = 0
    hyperparams: tuple = ()

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise ValueError(f"unknown learner {self.kind!r}; choose from {LEARNER_KINDS}")

    @property
    def params(self) -> dict:
        out = dict(DEFAULT_HYPERPARAMS[self.kind])
        out.update(dict(self.hyperparams))
        return out

    def with_params(self, **kw) -> LearnerSpec:
        merged = dict(self.hyperparams)
        merged.update(kw)
        return LearnerSpec(self.kind, self.seed, tuple(sorted(merged.items())))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "hyperparams": self.params}


# ---------------------------------------------------------------------------
# binning


def bin_features(x: np.ndarray, max_bins: int = 256) -> tuple[np.ndarray, list[np.ndarray]]:
    """Integer codes per column plus the cut points between consecutive codes.

    With at most ``max_bins`` distinct values per column the cuts are the
    midpoints between neighbouring values, so splits are exact CART splits.
    """
    n, f = x.shape
    codes = np.empty((n, f), dtype=np.int32)
    edges = []
    for j in range(f):
        uniq = np.unique(x[:, j])
        if len(uniq) > max_bins:
            pick = np.unique(np.linspace(0, len(uniq) - 1, max_bins).astype(np.int64))
            lower = uniq[pick[:-1]]
            upper = uniq[pick[:-1] + 1]
            cuts = (lower + upper) / 2.0
        else:
            cuts = (uniq[:-1] + uniq[1:]) / 2.0
        edges.append(cuts)
        codes[:, j] = np.searchsorted(cuts, x[:, j], side="left")
    return codes, edges


def apply_bins(x: np.ndarray, edges: list[np.ndarray]) -> np.ndarray:
    codes = np.empty(x.shape, dtype=np.int32)
    for j, cuts in enumerate(edges):
        codes[:, j] = np.searchsorted(cuts, x[:, j], side="left")
    return codes


# ---------------------------------------------------------------------------
# CART


@numba.njit(cache=True, nogil=True)
def _build_tree(codes, y, n_classes, sample, n_bins, max_depth, min_leaf, max_features, seed):
    n_feat = codes.shape[1]
    cap = 2 * len(sample) + 1
    feature = np.full(cap, -1, dtype=np.int64)
    split_bin = np.zeros(cap, dtype=np.int64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    leaf_class = np.zeros(cap, dtype=np.int64)

    idx = sample.copy()
    max_b = 1
    for j in range(n_feat):
        if n_bins[j] > max_b:
            max_b = n_bins[j]
    hist = np.zeros((max_b, n_classes), dtype=np.int64)
    counts = np.zeros(n_classes, dtype=np.int64)
    lc = np.zeros(n_classes, dtype=np.int64)
    feats = np.arange(n_feat)
    if max_features < n_feat:
        np.random.seed(seed)

    stack_node = np.zeros(cap, dtype=np.int64)
    stack_start = np.zeros(cap, dtype=np.int64)
    stack_end = np.zeros(cap, dtype=np.int64)
    stack_depth = np.zeros(cap, dtype=np.int64)
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = len(idx)
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        m = end - start

        counts[:] = 0
        for i in range(start, end):
            counts[y[idx[i]]] += 1
        best_c = 0
        for c in range(n_classes):
            if counts[c] > counts[best_c]:
                best_c = c
        leaf_class[node] = best_c
        if counts[best_c] == m or depth >= max_depth or m < 2 * min_leaf:
            continue

        sq = 0.0
        for c in range(n_classes):
            sq += counts[c] * counts[c]
        parent_imp = m - sq / m

        if max_features < n_feat:
            for a in range(max_features):
                b = a + np.random.randint(0, n_feat - a)
                tmp = feats[a]
                feats[a] = feats[b]
                feats[b] = tmp

        best_imp = parent_imp - 1e-9
        best_f = -1
        best_bin = -1
        n_try = max_features if max_features < n_feat else n_feat
        for a in range(n_try):
            f = feats[a]
            nb = n_bins[f]
            if nb < 2:
                continue
            hist[:nb, :] = 0
            for i in range(start, end):
                r = idx[i]
                hist[codes[r, f], y[r]] += 1
            lc[:] = 0
            n_left = 0
            for b in range(nb - 1):
                row_total = 0
                for c in range(n_classes):
                    lc[c] += hist[b, c]
                    row_total += hist[b, c]
                n_left += row_total
                if row_total == 0:
                    continue
                n_right = m - n_left
                if n_left < min_leaf:
                    continue
                if n_right < min_leaf:
                    break
                sl = 0.0
                sr = 0.0
                for c in range(n_classes):
                    sl += lc[c] * lc[c]
                    rc = counts[c] - lc[c]
                    sr += rc * rc
                imp = (n_left - sl / n_left) + (n_right - sr / n_right)
                if imp < best_imp:
                    best_imp = imp
                    best_f = f
                    best_bin = b
        if best_f < 0:
            continue

        # partition idx[start:end] by code <= best_bin
        i = start
        j = end - 1
        while i <= j:
            if codes[idx[i], best_f] <= best_bin:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        feature[node] = best_f
        split_bin[node] = best_bin
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        stack_node[top] = right[node]
        stack_start[top] = i
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = left[node]
        stack_start[top] = start
        stack_end[top] = i
        stack_depth[top] = depth + 1
        top += 1

    return feature[:n_nodes], split_bin[:n_nodes], left[:n_nodes], right[:n_nodes], leaf_class[:n_nodes]


@numba.njit(cache=True, nogil=True)
def _predict_tree(codes, feature, split_bin, left, right, leaf_class):
    n = codes.shape[0]
    out = np.empty(n, dtype=np.int64)
    for r in range(n):
        node = 0
        while feature[node] >= 0:
            if codes[r, feature[node]] <= split_bin[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = leaf_class[node]
    return out


@dataclass
class Tree:
    feature: np.ndarray
    split_bin: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_class: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_codes(self, codes: np.ndarray) -> np.ndarray:
        return _predict_tree(codes, self.feature, self.split_bin, self.left, self.right, self.leaf_class)


def grow_tree(codes, y, n_classes, sample, n_bins, max_depth=8, min_leaf=2, max_features=None, seed=0) -> Tree:
    max_depth = 1 << 30 if max_depth is None else max_depth
    max_features = codes.shape[1] if max_features is None else max_features
    parts = _build_tree(
        codes, y, n_classes, np.asarray(sample, dtype=np.int64), n_bins,
        int(max_depth), int(min_leaf), int(max_features), int(seed) % (2**32),
    )
    return Tree(*parts)


# ---------------------------------------------------------------------------
# logistic regression


@numba.njit(cache=True, nogil=True)
def _sgd_logistic(x, y, n_classes, perms, lr, l2):
    n, f = x.shape
    w = np.zeros((n_classes, f))
    b = np.zeros(n_classes)
    z = np.zeros(n_classes)
    decay = 1.0 - lr * l2
    for e in range(perms.shape[0]):
        for t in range(n):
            r = perms[e, t]
            zmax = -np.inf
            for c in range(n_classes):
                s = b[c]
                for k in range(f):
                    s += w[c, k] * x[r, k]
                z[c] = s
                if s > zmax:
                    zmax = s
            total = 0.0
            for c in range(n_classes):
                z[c] = math.exp(z[c] - zmax)
                total += z[c]
            for c in range(n_classes):
                g = z[c] / total
                if c == y[r]:
                    g -= 1.0
                for k in range(f):
                    w[c, k] = decay * w[c, k] - lr * g * x[r, k]
                b[c] -= lr * g
    return w, b



def fit_predict(spec: LearnerSpec, train_X, train_y, test_X, n_classes: int | None = None) -> np.ndarray:
    """Fit ``spec`` on the training split and return predicted class codes for ``test_X``."""
    train_X = np.ascontiguousarray(train_X, dtype=np.float64)
    test_X = np.ascontiguousarray(test_X, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    if len(train_X) == 0:
        raise DegenerateTraining("empty training set")
    if len(np.unique(train_y)) < 2:
        raise DegenerateTraining("training labels contain fewer than 2 classes")
    n_classes = int(train_y.max()) + 1 if n_classes is None else n_classes
    p = spec.params
    rng = np.random.default_rng(spec.seed)

    if spec.kind == LOGISTIC:
        n = len(train_X)
        perms = np.stack([rng.permutation(n) for _ in range(p["epochs"])]) if n else np.zeros((0, 0), np.int64)
        w, b = _sgd_logistic(train_X, train_y, n_classes, perms, p["lr"], p["l2"])
        with np.errstate(over="ignore", invalid="ignore"):
            scores = test_X @ w.T + b
        scores = np.nan_to_num(scores, nan=-np.inf)
        return scores.argmax(axis=1)

    codes, edges = bin_features(train_X, p["max_bins"])
    n_bins = np.array([len(e) + 1 for e in edges], dtype=np.int64)
    test_codes = apply_bins(test_X, edges)

    if spec.kind == TREE:
        tree = grow_tree(codes, train_y, n_classes, np.arange(len(train_y)), n_bins,
                         p["max_depth"], p["min_leaf"], None, spec.seed)
        return tree.predict_codes(test_codes)

    n = len(train_y)
    n_feat = train_X.shape[1]
    max_features = max(1, int(math.sqrt(n_feat)))
    votes = np.zeros((len(test_X), n_classes), dtype=np.int64)
    seeds = rng.integers(0, 2**31 - 1, size=p["n_trees"])
    for t in range(p["n_trees"]):
        sample = rng.integers(0, n, size=n)
        tree = grow_tree(codes, train_y, n_classes, sample, n_bins,
                         p["max_depth"], p["min_leaf"], max_features, seeds[t])
        pred = tree.predict_codes(test_codes)
        votes[np.arange(len(pred)), pred] += 1
    return votes.argmax(axis=1)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalResult:
    mean_accuracy: float
    per_fold: list[float]
    learner: LearnerSpec

    def to_dict(self) -> dict:
        return {"mean_accuracy": self.mean_accuracy, "per_fold": list(self.per_fold), "learner": self.learner.to_dict()}


@dataclass
class SuiteResult:
    mean_accuracy: float
    results: list[EvalResult]

    def to_dict(self) -> dict:
        return {"mean_accuracy": self.mean_accuracy, "learners": [r.to_dict() for r in self.results]}


class Evaluator:
    """Cross-validated accuracy of per-feature pipelines on one table and fold plan.

    Fitted per-feature blocks and finished scores are cached: both are pure
    functions of their keys.
    """

    def __init__(self, table: Table, fold_plan: FoldPlan, onehot_cap: int = DEFAULT_ONEHOT_CAP,
                 block_cache_size: int = 4096):
        self.table = table
        self.fold_plan = fold_plan
        self.onehot_cap = onehot_cap
        self.classes = table_column_classes(table, onehot_cap)
        self.folds = [(fold_plan.train_rows(f), fold_plan.test_rows(f)) for f in range(fold_plan.k)]
        self._blocks: OrderedDict = OrderedDict()
        self._block_cache_size = block_cache_size
        self._scores: dict = {}
        self._lock = threading.RLock()

    def block(self, j: int, spec: PipelineTriple) -> list[np.ndarray]:
        """Feature ``j`` transformed under ``spec``, one full-height matrix per fold."""
        key = (j, spec)
        with self._lock:
            hit = self._blocks.get(key)
            if hit is not None:
                self._blocks.move_to_end(key)
        if hit is not None:
            if isinstance(hit, InvalidPrimitive):
                raise hit
            return hit
        col = self.table.columns[j]
        try:
            out = []
            for train, _ in self.folds:
                fitted = fit_triple(spec, col, train, self.onehot_cap, self.classes[j])
                out.append(transform_column(fitted, col))
        except InvalidPrimitive as err:
            out = err.tagged(col.name)
        with self._lock:
            self._blocks[key] = out
            if len(self._blocks) > self._block_cache_size:
                self._blocks.popitem(last=False)
        if isinstance(out, InvalidPrimitive):
            raise out
        return out

    def evaluate(self, spec_per_feature: Sequence[PipelineTriple], learner: LearnerSpec) -> EvalResult:
        specs = tuple(spec_per_feature)
        if len(specs) != self.table.n_features:
            raise ValueError(f"need {self.table.n_features} triples, got {len(specs)}")
        key = (specs, learner)
        hit = self._scores.get(key)
        if hit is not None:
            if isinstance(hit, InvalidPrimitive):
                raise hit
            return hit
        try:
            blocks = [self.block(j, s) for j, s in enumerate(specs)]
        except InvalidPrimitive as err:
            self._scores[key] = err
            raise
        y = self.table.y
        n_classes = self.table.target.n_classes
        per_fold = []
        for f, (train, test) in enumerate(self.folds):
            x = np.hstack([b[f] for b in blocks])
            pred = fit_predict(learner, x[train], y[train], x[test], n_classes)
            per_fold.append(float(np.mean(pred == y[test])))
        result = EvalResult(float(np.mean(per_fold)), per_fold, learner)
        self._scores[key] = result
        return result


def evaluate_L(
    table: Table,
    spec_per_feature: Sequence[PipelineTriple],
    learner: LearnerSpec,
    fold_plan: FoldPlan,
    seed: int | None = None,
    onehot_cap: int = DEFAULT_ONEHOT_CAP,
) -> EvalResult:
    """Mean held-out accuracy over the folds; primitives are fit on each training split.

    ``seed``, when given, overrides the learner's seed.
    """
    if seed is not None and seed != learner.seed:
        learner = LearnerSpec(learner.kind, seed, learner.hyperparams)
    return Evaluator(table, fold_plan, onehot_cap).evaluate(spec_per_feature, learner)


def evaluate_suite(
    table: Table,
    spec_per_feature: Sequence[PipelineTriple],
    learner_list: Sequence[str | LearnerSpec] = LEARNER_KINDS,
    k: int = 10,
    seed: int = 0,
    onehot_cap: int = DEFAULT_ONEHOT_CAP,
    evaluator: Evaluator | None = None,
) -> SuiteResult:
    """Average of per-learner mean accuracies."""
    if evaluator is None:
        evaluator = Evaluator(table, make_folds(table, k, seed), onehot_cap)
    results = []
    for item in learner_list:
        spec = item if isinstance(item, LearnerSpec) else LearnerSpec(item, seed)
        results.append(evaluator.evaluate(spec_per_feature, spec))
    return SuiteResult(float(np.mean([r.mean_accuracy for r in results])), results)
