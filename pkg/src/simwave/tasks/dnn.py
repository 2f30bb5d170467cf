"""Digital baseline: complex linear -> split-ReLU -> complex affine -> power softmax.

    z = W2 relu_split(W1 x) + b2,     logits = |z|^2

Split-ReLU applies ReLU to the real and imaginary parts independently
(modReLU is the usual alternative). The only bias sits on the output layer;
it keeps the parameter budget within 10% of the SIM's phase count at the
desk-scale setting while letting the net use the absolute signal level,
which a homogeneous network cannot. Parameters are counted in reals (a
complex weight counts twice).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from simwave.errors import ConfigError, DomainError, NumericalError
from simwave.optimize import OptimizerState, TrainConfig, step
from simwave.tasks.classifier import (ConfusionMatrix, TrainHistory, confusion_matrix, predict,
                                      softmax_xent)
from simwave.tasks.data import Dataset, rotate_phase

BUDGET_TOLERANCE = 0.10


@dataclass(frozen=True)
class DNNWeights:
    W1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    @property
    def parameter_count(self) -> int:
        return 2 * (self.W1.size + self.W2.size + self.b2.size)

    def pack(self) -> np.ndarray:
        return np.concatenate([np.concatenate([a.real.ravel(), a.imag.ravel()])
                               for a in (self.W1, self.W2, self.b2)])

    def unpack(self, v: np.ndarray) -> "DNNWeights":
        out, o = [], 0
        for a in (self.W1, self.W2, self.b2):
            n = a.size
            out.append((v[o:o + n] + 1j * v[o + n:o + 2 * n]).reshape(a.shape))
            o += 2 * n
        return DNNWeights(*out)


@dataclass
class DNNResult:
    weights: DNNWeights
    history: TrainHistory
    confusion: ConfusionMatrix


def parameter_count(dim: int, hidden: int, classes: int) -> int:
    return 2 * (hidden * dim + classes * hidden + classes)


def matched_hidden_dim(phase_count: int, dim: int, classes: int) -> int:
    """Hidden width whose parameter count is closest to ``phase_count``."""
    h = max(1, phase_count // (2 * (dim + classes)))
    return min((h, h + 1), key=lambda k: (abs(parameter_count(dim, k, classes) - phase_count), k))


def check_budget(dim: int, hidden: int, classes: int, phase_count: int) -> None:
    n = parameter_count(dim, hidden, classes)
    if abs(n - phase_count) > BUDGET_TOLERANCE * phase_count:
        raise ConfigError(f"DNN has {n} real parameters but the SIM has {phase_count} phases "
                          f"(mismatch above {BUDGET_TOLERANCE:.0%})", key="hidden_dim")


def split_relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(a.real, 0.0) + 1j * np.maximum(a.imag, 0.0)


def dnn_forward(weights: DNNWeights, X: np.ndarray) -> np.ndarray:
    """Logits ``|z|^2`` (classes, batch) for samples ``X`` (dim, batch)."""
    z = weights.W2 @ split_relu(weights.W1 @ X) + weights.b2[:, None]
    return np.abs(z) ** 2


def loss_and_grad(weights: DNNWeights, X: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and the real-coordinate gradient (packed like ``weights.pack()``)."""
    a = weights.W1 @ X
    u = split_relu(a)
    z = weights.W2 @ u + weights.b2[:, None]
    loss, gp = softmax_xent(np.abs(z) ** 2, labels, 1.0)
    gz = gp * z                                 # dL / d conj(z)
    gu = weights.W2.conj().T @ gz
    ga = gu.real * (a.real > 0) + 1j * gu.imag * (a.imag > 0)
    wirtinger = DNNWeights(ga @ X.conj().T, gz @ u.conj().T, gz.sum(axis=1))
    # d/dRe = 2 Re(d/dconj), d/dIm = 2 Im(d/dconj)
    return loss, 2.0 * wirtinger.pack()


def init_weights(dim: int, hidden: int, classes: int, seed: int,
                 zero_output: bool = False) -> DNNWeights:
    rng = np.random.default_rng([seed, 2])
    W1 = (rng.standard_normal((hidden, dim)) + 1j * rng.standard_normal((hidden, dim))) / np.sqrt(2 * dim)
    W2 = (rng.standard_normal((classes, hidden)) + 1j * rng.standard_normal((classes, hidden))) / np.sqrt(2 * hidden)
    if zero_output:
        W2 = np.zeros_like(W2)
    return DNNWeights(W1, W2, np.zeros(classes, dtype=complex))


def evaluate_dnn(weights: DNNWeights, data: Dataset) -> ConfusionMatrix:
    if len(data) == 0:
        raise DomainError("cannot evaluate an empty split")
    return confusion_matrix(data.labels, predict(dnn_forward(weights, data.iq.T)), data.class_count)


def dnn_baseline(dataset: Dataset, hidden_dim: int, config: TrainConfig, *,
                 phase_count: int | None = None, rotation_deg: float = 0.0,
                 init: DNNWeights | None = None) -> DNNResult:
    """Train the baseline with the shared optimizer.

    With ``phase_count`` (the SIM's learnable phases) the real parameter count
    must lie within 10% of it. Returns the weights with the best test
    accuracy, the per-epoch history and the test confusion matrix.
    """
    K, d = dataset.class_count, dataset.dim
    if hidden_dim < 1:
        raise ConfigError("hidden_dim must be >= 1", key="hidden_dim")
    if phase_count is not None:
        check_budget(d, hidden_dim, K, phase_count)
    data = rotate_phase(dataset, rotation_deg) if rotation_deg else dataset
    train, test = data.split("train"), data.split("test")
    if len(train) == 0 or len(test) == 0:
        raise DomainError("train and test splits must be non-empty")

    template = init or init_weights(d, hidden_dim, K, config.seed)
    params = template.pack()
    shuffler = np.random.default_rng([config.seed, 1])
    state = OptimizerState()
    history = TrainHistory()
    best, best_key = template, None
    for epoch in range(config.epochs):
        order = shuffler.permutation(len(train))
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            loss, grad = loss_and_grad(template.unpack(params), train.iq[idx].T, train.labels[idx])
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite DNN loss at epoch {epoch}", partial=history)
            params, state = step(params, grad, config, state)
        cur = template.unpack(params)
        for part, split in (("train", train), ("test", test)):
            logits = dnn_forward(cur, split.iq.T)
            loss, _ = softmax_xent(logits, split.labels, 1.0)
            getattr(history, f"{part}_loss").append(loss)
            getattr(history, f"{part}_acc").append(float(np.mean(predict(logits) == split.labels)))
        key = (-history.test_acc[-1], history.test_loss[-1])
        if best_key is None or key < best_key:
            best, best_key = cur, key
    return DNNResult(best, history, evaluate_dnn(best, test))
