"""Independent reference computations the tests compare against."""
from __future__ import annotations

import itertools

import numpy as np

from clusterp3s.learners import TREE, Evaluator, LearnerSpec
from clusterp3s.prims import InvalidPrimitive
from clusterp3s.tabular import make_folds


def central_diff(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at ``x`` (``x`` is perturbed in place and restored)."""
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        up = f()
        x[i] = old - h
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def rel_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-8) -> float:
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)))


def naive_forward(layers, x):
    """Row-by-row forward pass with plain Python loops."""
    out = []
    for row in np.atleast_2d(x):
        h = list(row)
        for w, b, act in layers:
            z = [sum(w[o][i] * h[i] for i in range(len(h))) + b[o] for o in range(len(b))]
            if act == "Rectifier":
                h = [max(v, 0.0) for v in z]
            elif act == "SoftmaxOutput":
                m = max(z)
                e = [np.exp(v - m) for v in z]
                h = [v / sum(e) for v in e]
            else:
                h = z
        out.append(h)
    return np.array(out)


def mean_impute(cells):
    present = [c for c in cells if c is not None]
    return sum(present) / len(present)


def median_impute(cells):
    s = sorted(c for c in cells if c is not None)
    n = len(s)
    return s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2


def population_std(xs):
    mu = sum(xs) / len(xs)
    return (sum((x - mu) ** 2 for x in xs) / len(xs)) ** 0.5


def gini(counts) -> float:
    n = sum(counts)
    return 1.0 - sum((c / n) ** 2 for c in counts) if n else 0.0


def brute_force_optimum(table, triples, seed, folds=10):
    """Best reward-learner accuracy over every per-feature assignment of ``triples``."""
    ev = Evaluator(table, make_folds(table, folds, seed))
    spec = LearnerSpec(TREE, seed)
    best = None
    for combo in itertools.product(triples, repeat=table.n_features):
        try:
            score = ev.evaluate(combo, spec).mean_accuracy
        except InvalidPrimitive:
            continue
        best = score if best is None else max(best, score)
    return best


def repeat_invalid_samples(trials, classes):
    """Trials that still contain a memo key after that key first failed."""
    first = {}
    repeats = 0
    for i, t in enumerate(trials):
        if not t.valid:
            key = (tuple(t.invalid["primitive"]), t.invalid["column_class"])
            first.setdefault(key, i)
        for j, spec in enumerate(t.per_feature()):
            for prim in spec.primitives:
                key = (prim, classes[j])
                if key in first and first[key] < i:
                    repeats += 1
    return repeats, first
