"""Column embeddings: term-frequency rows and their autoencoder bottleneck codes.

Each feature column is read as a document whose terms are its cell values.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .neural import AdamState, DenseNet, adam_step, backward, forward, mse_loss
from .tabular import NUMERIC, Column, Table, canonical_term

MISSING_TERM = "⟂missing"
DEFAULT_VOCAB_CAP = 2048
HIDDEN = 128


@dataclass
class Vocabulary:
    terms: list[str]
    oov_index: int | None = None
    quantize_digits: int = 4
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.terms)}

    @property
    def size(self) -> int:
        return len(self.terms) + (1 if self.oov_index is not None else 0)

    def lookup(self, term: str) -> int | None:
        i = self.index.get(term)
        return self.oov_index if i is None else i


def column_terms(col: Column, quantize_digits: int = 4) -> list[str]:
    if col.kind == NUMERIC:
        return [MISSING_TERM if np.isnan(v) else canonical_term(v, quantize_digits) for v in col.values]
    return [MISSING_TERM if v is None else v for v in col.values]


def build_vocabulary(table: Table, vocab_cap: int = DEFAULT_VOCAB_CAP, quantize_digits: int = 4) -> Vocabulary:
    """Terms ranked by global frequency (ties lexicographic); overflow goes to one OOV bucket."""
    counts: Counter = Counter()
    for col in table.columns:
        counts.update(column_terms(col, quantize_digits))
    ranked = sorted(counts, key=lambda t: (-counts[t], t))
    if len(ranked) > vocab_cap:
        return Vocabulary(ranked[:vocab_cap], vocab_cap, quantize_digits)
    return Vocabulary(ranked, None, quantize_digits)


def term_counts(table: Table, vocab: Vocabulary) -> np.ndarray:
    counts = np.zeros((table.n_features, vocab.size))
    for j, col in enumerate(table.columns):
        for term, c in Counter(column_terms(col, vocab.quantize_digits)).items():
            counts[j, vocab.lookup(term)] += c
    return counts


def term_frequency_matrix(table: Table, vocab: Vocabulary) -> np.ndarray:
    """``log(1 + count)`` term frequencies, each row scaled to unit L2 norm."""
    e = np.log1p(term_counts(table, vocab))
    norms = np.linalg.norm(e, axis=1, keepdims=True)
    return np.divide(e, norms, out=np.zeros_like(e), where=norms > 0)


@dataclass
class AutoencoderResult:
    net: DenseNet
    condensed: np.ndarray
    loss_trace: list[float]

    @property
    def bottleneck_layer(self) -> int:
        return len(self.net.layers) // 2


def autoencoder_dims(vocab_size: int, hidden: int = HIDDEN) -> list[int]:
    return [vocab_size, hidden, hidden, hidden, hidden, hidden, vocab_size]


def encode(net: DenseNet, e: np.ndarray) -> np.ndarray:
    """Bottleneck activation (output of the third of six layers)."""
    return forward(net, e).inputs[len(net.layers) // 2]


def train_autoencoder(
    e: np.ndarray, seed: int = 0, epochs: int = 100, lr: float = 1e-3, hidden: int = HIDDEN
) -> AutoencoderResult:
    """Full-batch Adam on the reconstruction MSE; returns the bottleneck codes of ``e``."""
    e = np.asarray(e, dtype=np.float64)
    net = DenseNet.build(autoencoder_dims(e.shape[1], hidden), seed=seed)
    adam = AdamState.for_params(net.params(), lr=lr)
    trace = []
    for _ in range(epochs):
        acts = forward(net, e)
        loss, grad = mse_loss(acts.output, e)
        trace.append(loss)
        adam_step(adam, net.params(), backward(net, acts, grad))
    trace.append(mse_loss(net(e), e)[0])
    return AutoencoderResult(net, encode(net, e), trace)


def embed_table(
    table: Table, seed: int = 0, epochs: int = 100, vocab_cap: int = DEFAULT_VOCAB_CAP, quantize_digits: int = 4
) -> tuple[np.ndarray, AutoencoderResult]:
    vocab = build_vocabulary(table, vocab_cap, quantize_digits)
    e = term_frequency_matrix(table, vocab)
    return e, train_autoencoder(e, seed=seed, epochs=epochs)
