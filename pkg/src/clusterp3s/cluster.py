"""Feature clustering: k-means pseudo-labels, the policy network and its REINFORCE update.

Cluster ids are 1-based in :class:`ClusterAssignment`, 0-based everywhere else.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .neural import (
    SOFTMAX,
    AdamState,
    DenseNet,
    adam_step,
    backward,
    cross_entropy_loss,
    forward,
    onehot,
)

SAMPLED = "Sampled"
ARGMAX = "Argmax"
KMEANS = "KMeans"
RANDOM = "Random"


class BadK(ValueError):
    pass


class StaleAssignment(ValueError):
    pass


@dataclass(frozen=True)
class ClusterAssignment:
    labels: tuple[int, ...]
    K: int
    source: str

    def __post_init__(self):
        if any(not 1 <= c <= self.K for c in self.labels):
            raise ValueError(f"labels must lie in [1, {self.K}]")

    @classmethod
    def from_zero_based(cls, labels, K: int, source: str) -> ClusterAssignment:
        return cls(tuple(int(c) + 1 for c in labels), K, source)

    @property
    def zero_based(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int64) - 1

    def members(self, cluster_id: int) -> list[int]:
        return [j for j, c in enumerate(self.labels) if c == cluster_id]

    def to_dict(self, feature_names) -> dict[str, int]:
        return {name: c for name, c in zip(feature_names, self.labels)}


# ---------------------------------------------------------------------------
# k-means


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = [points[rng.integers(n)]]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers.append(points[idx])
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return np.array(centers)


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int) -> tuple[np.ndarray, float]:
    k = len(centers)
    labels = None
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new = d2.argmin(axis=1)
        # reseed empty clusters with the point farthest from its center
        for c in range(k):
            if not np.any(new == c):
                # only steal from clusters that keep at least one member
                dist = d2[np.arange(len(points)), new]
                dist[np.bincount(new, minlength=k)[new] < 2] = -1.0
                far = int(dist.argmax())
                centers[c] = points[far]
                new[far] = c
                d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centers[c] = points[labels == c].mean(axis=0)
    inertia = float(((points - centers[labels]) ** 2).sum())
    return labels, inertia


def kmeans(points: np.ndarray, K: int, seed: int = 0, n_init: int = 10, max_iter: int = 100) -> ClusterAssignment:
    """k-means++ seeding with ``n_init`` restarts; lowest inertia wins."""
    if K < 1:
        raise BadK(f"K={K} must be >= 1")
    points = np.asarray(points, dtype=np.float64)
    k = min(K, len(points))
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(n_init):
        centers = _kmeans_pp(points, k, rng)
        labels, inertia = _lloyd(points, centers.copy(), max_iter)
        if inertia < best_inertia - 1e-12:
            best_labels, best_inertia = labels, inertia
    return ClusterAssignment.from_zero_based(best_labels, K, KMEANS)


def kmeans_inertia(points: np.ndarray, assignment: ClusterAssignment) -> float:
    points = np.asarray(points, dtype=np.float64)
    labels = assignment.zero_based
    total = 0.0
    for c in np.unique(labels):
        block = points[labels == c]
        total += float(((block - block.mean(axis=0)) ** 2).sum())
    return total


# ---------------------------------------------------------------------------
# policy network


@dataclass
class PolicyNet:
    net: DenseNet
    adam: AdamState

    @classmethod
    def create(cls, in_dim: int, K: int, seed: int = 0, hidden: int = 128, lr: float = 1e-3) -> PolicyNet:
        net = DenseNet.build([in_dim, hidden, hidden, hidden, K], output=SOFTMAX, seed=seed)
        return cls(net, AdamState.for_params(net.params(), lr=lr))

    @property
    def K(self) -> int:
        return self.net.layers[-1].out_dim

    def probs(self, emb: np.ndarray) -> np.ndarray:
        return self.net(emb)


@dataclass
class RewardState:
    history: list[float] = field(default_factory=list)

    @property
    def baseline(self) -> float:
        return float(np.mean(self.history)) if self.history else 0.0


def agreement(policy: PolicyNet, emb: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(policy.probs(emb).argmax(axis=1) == labels))


def pretrain_policy(
    policy: PolicyNet, emb: np.ndarray, pseudo_labels, epochs: int = 200, target_agreement: float = 0.99
) -> PolicyNet:
    """Supervised warm start on k-means pseudo-labels (full-batch cross-entropy)."""
    if isinstance(pseudo_labels, ClusterAssignment):
        labels = pseudo_labels.zero_based
    else:
        labels = np.asarray(pseudo_labels, dtype=np.int64)
    targets = onehot(labels, policy.K)
    for _ in range(epochs):
        acts = forward(policy.net, emb)
        if np.mean(acts.output.argmax(axis=1) == labels) >= target_agreement:
            break
        _, grad = cross_entropy_loss(acts.output, targets)
        adam_step(policy.adam, policy.net.params(), backward(policy.net, acts, grad))
    return policy


def sample_assignment(policy: PolicyNet, emb: np.ndarray, rng, mode: str = SAMPLED) -> ClusterAssignment:
    """Draw one cluster per feature (``Sampled``) or take the mode (``Argmax``, ties to lowest id)."""
    probs = policy.probs(emb)
    if mode == ARGMAX:
        return ClusterAssignment.from_zero_based(probs.argmax(axis=1), policy.K, ARGMAX)
    rng = np.random.default_rng(rng)
    u = rng.random(len(probs))
    cdf = np.cumsum(probs, axis=1)
    labels = np.minimum((u[:, None] >= cdf).sum(axis=1), policy.K - 1)
    return ClusterAssignment.from_zero_based(labels, policy.K, SAMPLED)


def reinforce_gradient(probs: np.ndarray, labels: np.ndarray, r: float) -> np.ndarray:
    """Logit gradient of ``-r * sum_j log p(c_j | e_j)``: ``r * (p - onehot)`` per row."""
    return r * (probs - onehot(labels, probs.shape[1]))


def reinforce_update(
    policy: PolicyNet,
    emb: np.ndarray,
    assignment: ClusterAssignment,
    reward_state: RewardState,
    r_perf: float,
) -> float:
    """One Adam step on ``-(r_perf - baseline) * sum_j log p(c_j | e_j)``.

    The baseline is the mean of rewards seen before this call; ``r_perf`` is
    appended afterwards. Returns the advantage ``r``. A zero advantage leaves
    the parameters untouched (Adam would still move them through its momentum).
    """
    if assignment.source != SAMPLED:
        raise StaleAssignment(f"REINFORCE needs a Sampled assignment, got {assignment.source}")
    r = float(r_perf) - reward_state.baseline
    if r != 0.0:
        acts = forward(policy.net, emb)
        grad = reinforce_gradient(acts.output, assignment.zero_based, r)
        adam_step(policy.adam, policy.net.params(), backward(policy.net, acts, grad))
    reward_state.history.append(float(r_perf))
    return r
