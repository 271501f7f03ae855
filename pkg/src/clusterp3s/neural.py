"""Small dense-network engine: forward/backward passes, losses and Adam.

Only what the autoencoder and the clustering policy need. Row-major batches:
``x`` has shape ``(n, in_dim)``; layer weights have shape ``(out, in)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RELU = "Rectifier"
IDENTITY = "Identity"
SOFTMAX = "SoftmaxOutput"

PROB_CLAMP = 1e-12


class ShapeMismatch(ValueError):
    pass


@dataclass
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: str = RELU

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class DenseNet:
    layers: list[Layer]
    rng_seed: int = 0

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ShapeMismatch(f"layer widths {a.out_dim} -> {b.in_dim} do not chain")
        for layer in self.layers[:-1]:
            if layer.activation == SOFTMAX:
                raise ValueError("SoftmaxOutput is only allowed on the final layer")

    @classmethod
    def build(cls, dims: list[int], hidden: str = RELU, output: str = IDENTITY, seed: int = 0) -> DenseNet:
        """Glorot-uniform weights, zero biases, ``len(dims) - 1`` layers."""
        rng = np.random.default_rng(seed)
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
            act = output if i == len(dims) - 2 else hidden
            layers.append(Layer(w, np.zeros(fan_out), act))
        return cls(layers, seed)

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend((layer.weights, layer.bias))
        return out

    def copy(self) -> DenseNet:
        return DenseNet(
            [Layer(l.weights.copy(), l.bias.copy(), l.activation) for l in self.layers], self.rng_seed
        )

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)[-1]

    # serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "densenet-v1",
            "rng_seed": self.rng_seed,
            "layers": [
                {
                    "shape": list(l.weights.shape),
                    "activation": l.activation,
                    "weights": l.weights.ravel().tolist(),
                    "bias": l.bias.tolist(),
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> DenseNet:
        layers = []
        for spec in d["layers"]:
            w = np.array(spec["weights"], dtype=np.float64).reshape(spec["shape"])
            layers.append(Layer(w, np.array(spec["bias"], dtype=np.float64), spec["activation"]))
        return cls(layers, d.get("rng_seed", 0))

    def save(self, path: str | Path) -> None:
        # json writes floats with repr, so the round trip is bit-exact
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> DenseNet:
        return cls.from_dict(json.loads(Path(path).read_text()))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == RELU:
        return np.maximum(z, 0.0)
    if kind == SOFTMAX:
        return softmax(z)
    return z


@dataclass
class Activations:
    """Inputs of every layer plus the final output; ``pre`` holds pre-activations."""

    inputs: list[np.ndarray]
    pre: list[np.ndarray]

    @property
    def output(self) -> np.ndarray:
        return self.inputs[-1]

    def __getitem__(self, i):
        return self.inputs[i]


def forward(net: DenseNet, batch: np.ndarray) -> Activations:
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if x.shape[1] != net.layers[0].in_dim:
        raise ShapeMismatch(f"batch width {x.shape[1]} != input dim {net.layers[0].in_dim}")
    inputs = [x]
    pre = []
    for layer in net.layers:
        z = x @ layer.weights.T + layer.bias
        x = _activate(z, layer.activation)
        pre.append(z)
        inputs.append(x)
    return Activations(inputs, pre)


def backward(net: DenseNet, acts: Activations, output_gradient: np.ndarray) -> list[np.ndarray]:
    """Parameter gradients, ordered like ``net.params()``.

    ``output_gradient`` is taken with respect to the final layer's
    pre-activation: for Identity and SoftmaxOutput layers that is the
    prediction (resp. logit) gradient the loss functions return.
    """
    g = np.asarray(output_gradient, dtype=np.float64)
    if g.shape != acts.pre[-1].shape:
        raise ShapeMismatch(f"output gradient {g.shape} != output {acts.pre[-1].shape}")
    last = net.layers[-1]
    if last.activation == RELU:
        g = g * (acts.pre[-1] > 0)
    grads: list[np.ndarray] = [None] * (2 * len(net.layers))
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        grads[2 * i] = g.T @ acts.inputs[i]
        grads[2 * i + 1] = g.sum(axis=0)
        if i > 0:
            g = (g @ layer.weights) * (acts.pre[i - 1] > 0)
    return grads


def mse_loss(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeMismatch(f"{pred.shape} != {target.shape}")
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def cross_entropy_loss(probs: np.ndarray, onehot_targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood and its gradient w.r.t. the softmax logits."""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    onehot = np.atleast_2d(np.asarray(onehot_targets, dtype=np.float64))
    if probs.shape != onehot.shape:
        raise ShapeMismatch(f"{probs.shape} != {onehot.shape}")
    n = probs.shape[0]
    p_target = np.sum(probs * onehot, axis=1)
    loss = float(-np.mean(np.log(np.maximum(p_target, PROB_CLAMP))))
    return loss, (probs - onehot) / n


def onehot(labels: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((len(labels), k))
    out[np.arange(len(labels)), labels] = 1.0
    return out


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: list[np.ndarray], lr: float = 1e-3, **kw) -> AdamState:
        return cls(lr=lr, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **kw)


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    if len(params) != len(grads):
        raise ShapeMismatch("params and grads differ in length")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape or m.shape != p.shape:
            raise ShapeMismatch(f"param {p.shape} vs grad {g.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
