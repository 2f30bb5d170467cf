"""SIM-LIA: the cascade as a linear analog classifier with a per-class antenna readout.

A sample is written directly onto the layer-1 fields, propagates through the
stack and the space-to-ground channel, and the K receive antennas report
powers ``p_k = |y_k|^2``. Logits are the normalized powers ``p_k / sum(p)``
and training minimizes the cross-entropy of ``softmax(beta * logits)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from simwave.channel import (ChannelConfig, ChannelRealization, ground_array_positions,
                             los_component, sample_rician)
from simwave.core import (PhaseProfile, PropagationSet, SimGeometry, build_propagation_set,
                          cascade_response, exit_aperture_positions, quantize_phases)
from simwave.errors import DomainError, NumericalError
from simwave.optimize import OptimizerState, TrainConfig, phase_gradient, step
from simwave.tasks.data import Dataset, Sample, rotate_phase

DEFAULT_BETA = 10.0
_TINY = 1e-300


@dataclass(frozen=True)
class ClassifierConfig:
    class_count: int = 4
    readout_antennas: int = 4
    rotation_deg: float = 90.0
    rotation_enabled: bool = True
    beta: float = DEFAULT_BETA
    train: TrainConfig = field(default_factory=TrainConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    def __post_init__(self):
        if self.readout_antennas != self.class_count:
            raise DomainError("one readout antenna per class: readout_antennas must equal class_count")
        if self.channel.rx_count != self.readout_antennas:
            raise DomainError("channel rx_count must equal readout_antennas")
        if not 0.0 <= self.rotation_deg < 360.0:
            raise DomainError(f"rotation_deg must lie in [0, 360), got {self.rotation_deg}")
        if not self.beta > 0:
            raise DomainError("beta must be > 0")


@dataclass(frozen=True)
class ConfusionMatrix:
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / max(self.total, 1))

    @property
    def per_class_accuracy(self) -> np.ndarray:
        rows = self.counts.sum(axis=1)
        return np.diag(self.counts) / np.maximum(rows, 1)


def confusion_matrix(labels, predictions, class_count: int) -> ConfusionMatrix:
    counts = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(counts, (np.asarray(labels), np.asarray(predictions)), 1)
    return ConfusionMatrix(counts)


def classifier_setup(geometry: SimGeometry, channel: ChannelConfig, draw: int = 0):
    """Classifier-mode propagation set and the fixed seeded channel realization."""
    props = build_propagation_set(geometry, geometry.per_layer, exit_aperture_positions(geometry))
    los = los_component(geometry, ground_array_positions(geometry, channel))
    chan = sample_rician(channel, los, draw=draw, carrier_freq=geometry.carrier_freq)
    return props, chan


# -- forward pass -----------------------------------------------------------------

def normalized_power(y: np.ndarray) -> tuple:
    """Column-wise ``|y|^2 / sum |y|^2``; returns (logits, powers, totals)."""
    p = np.abs(y) ** 2
    s = p.sum(axis=0, keepdims=True)
    return p / np.maximum(s, _TINY), p, s


def predict(logits: np.ndarray) -> np.ndarray:
    # argmax returns the lowest index among ties
    return np.argmax(logits, axis=0)


def _system(phases, props: PropagationSet, chan: ChannelRealization):
    resp = cascade_response(props, phases)
    if chan.H.shape[1] != resp.output_dim:
        raise DomainError(f"channel width {chan.H.shape[1]} does not match cascade output {resp.output_dim}")
    M = chan.path_loss_linear * chan.H
    return resp, M, M @ resp.G


def forward_classify(phases, props: PropagationSet, chan: ChannelRealization, sample):
    """Logits (normalized antenna powers) and predicted class of one sample."""
    x = sample.iq if isinstance(sample, Sample) else np.asarray(sample)
    if x.shape != (props.input_dim,):
        raise DomainError(f"sample has shape {x.shape}, expected ({props.input_dim},)")
    _, _, E = _system(phases, props, chan)
    logits, _, _ = normalized_power((E @ x)[:, None])
    return logits[:, 0], int(predict(logits)[0])


def softmax_xent(logits: np.ndarray, labels: np.ndarray, beta: float):
    """Mean cross-entropy of ``softmax(beta * logits)`` and its gradient w.r.t. logits.

    ``logits`` is (classes, batch).
    """
    z = beta * logits
    z = z - z.max(axis=0, keepdims=True)
    e = np.exp(z)
    prob = e / e.sum(axis=0, keepdims=True)
    n = logits.shape[1]
    cols = np.arange(n)
    loss = -np.mean(np.log(np.maximum(prob[labels, cols], _TINY)))
    g = prob
    g[labels, cols] -= 1.0
    return float(loss), beta * g / n


def batch_loss_grad(E: np.ndarray, X: np.ndarray, labels: np.ndarray, beta: float):
    """Loss and Wirtinger gradient w.r.t. the end-to-end matrix ``E`` for samples ``X`` (dim, batch)."""
    Y = E @ X
    q, p, s = normalized_power(Y)
    loss, gq = softmax_xent(q, labels, beta)
    # q = p / s  =>  dL/dp = (dL/dq - sum_j dL/dq_j q_j) / s
    gp = (gq - np.sum(gq * q, axis=0, keepdims=True)) / np.maximum(s, _TINY)
    gY = gp * Y
    return loss, gY @ X.conj().T


def _prepare(dataset: Dataset, config: ClassifierConfig) -> Dataset:
    if config.rotation_enabled and config.rotation_deg != 0.0:
        return rotate_phase(dataset, config.rotation_deg)
    return dataset


def _score(E, data: Dataset, beta: float):
    q, _, _ = normalized_power(E @ data.iq.T)
    loss, _ = softmax_xent(q, data.labels, beta)
    return loss, predict(q)


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    train_acc: list = field(default_factory=list)
    test_loss: list = field(default_factory=list)
    test_acc: list = field(default_factory=list)

    def __len__(self):
        return len(self.train_loss)

    def rows(self):
        for e in range(len(self)):
            yield e, self.train_loss[e], self.train_acc[e], self.test_loss[e], self.test_acc[e]


@dataclass
class ClassifierResult:
    phases: PhaseProfile
    history: TrainHistory
    best_epoch: int


def train_classifier(dataset: Dataset, props: PropagationSet, config: ClassifierConfig,
                     chan: ChannelRealization, init: PhaseProfile | None = None) -> ClassifierResult:
    """Mini-batch training of the phase screens.

    Returns the phases with the highest test accuracy over all epochs (ties go
    to the lower test loss, then the earlier epoch) and the per-epoch history
    measured after each epoch's updates.
    """
    if dataset.dim != props.input_dim:
        raise DomainError(f"dataset dim {dataset.dim} does not match layer-1 size {props.input_dim}")
    if dataset.class_count != config.class_count:
        raise DomainError("dataset class_count does not match the classifier config")
    data = _prepare(dataset, config)
    train, test = data.split("train"), data.split("test")
    if len(train) == 0 or len(test) == 0:
        raise DomainError("train and test splits must be non-empty")

    tc = config.train
    bits, schedule = tc.quantization_bits, tc.quantization_schedule
    theta = init or PhaseProfile(np.random.default_rng(tc.seed).uniform(
        0.0, 2.0 * np.pi, size=(props.depth, props.per_layer)))
    shuffler = np.random.default_rng([tc.seed, 1])
    M = chan.path_loss_linear * chan.H

    def active(p):
        return quantize_phases(p, bits) if schedule == "per_epoch" else p

    state = OptimizerState()
    history = TrainHistory()
    best = None
    best_key = None
    for epoch in range(tc.epochs):
        order = shuffler.permutation(len(train))
        for start in range(0, len(order), tc.batch_size):
            idx = order[start:start + tc.batch_size]
            resp = cascade_response(props, active(theta))
            E = M @ resp.G
            loss, gE = batch_loss_grad(E, train.iq[idx].T, train.labels[idx], config.beta)
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch}", partial=history)
            theta, state = step(theta, phase_gradient(resp, M.conj().T @ gE), tc, state)

        point = active(theta)
        E = M @ cascade_response(props, point).G
        tr_loss, tr_pred = _score(E, train, config.beta)
        te_loss, te_pred = _score(E, test, config.beta)
        history.train_loss.append(tr_loss)
        history.train_acc.append(float(np.mean(tr_pred == train.labels)))
        history.test_loss.append(te_loss)
        history.test_acc.append(float(np.mean(te_pred == test.labels)))
        key = (-history.test_acc[-1], te_loss)
        if best_key is None or key < best_key:
            best, best_key, best_epoch = point, key, epoch

    if schedule == "final":
        best = quantize_phases(best, bits)
    return ClassifierResult(best, history, best_epoch)


def evaluate_classifier(phases, props: PropagationSet, chan: ChannelRealization, data: Dataset,
                        rotation_deg: float = 0.0) -> ConfusionMatrix:
    """Confusion matrix over ``data`` (rows truth, columns prediction).

    ``rotation_deg`` must match the augmentation used in training.
    """
    if len(data) == 0:
        raise DomainError("cannot evaluate an empty split")
    if rotation_deg:
        data = rotate_phase(data, rotation_deg)
    _, _, E = _system(phases, props, chan)
    q, _, _ = normalized_power(E @ data.iq.T)
    return confusion_matrix(data.labels, predict(q), data.class_count)


def separable_fixture(props: PropagationSet, chan: ChannelRealization, per_class: int = 20,
                      seed: int = 0, noise: float = 0.02):
    """Two-class toy set with orthogonal supports and a known perfect phase setting.

    The layer-1 elements are split into two halves. For a random reference
    setting ``theta_ref`` each class pattern lives on its own half and is
    chosen orthogonal to the other class's readout row there, so
    ``theta_ref`` separates the classes. Samples are the pattern plus
    ``noise``-relative perturbations on the same support, times a random
    complex gain.

    Returns ``(dataset, theta_ref)``.
    """
    n = props.input_dim
    if chan.H.shape[0] != 2:
        raise DomainError("the separable fixture needs a two-antenna readout")
    if n < 4:
        raise DomainError("the separable fixture needs at least 4 layer-1 elements")
    rng = np.random.default_rng([seed, 7])
    theta_ref = PhaseProfile(rng.uniform(0.0, 2.0 * np.pi, size=(props.depth, props.per_layer)))
    _, _, E = _system(theta_ref, props, chan)
    supports = (np.arange(n // 2), np.arange(n // 2, n))

    iq, labels = [], []
    for c, supp in enumerate(supports):
        own, other = E[c, supp], E[1 - c, supp]
        # conj(own) with the component that reaches the other antenna removed
        u = own.conj() - (np.vdot(other.conj(), own.conj()) / np.vdot(other, other)) * other.conj()
        u /= np.linalg.norm(u)
        for _ in range(per_class):
            pert = rng.standard_normal(len(supp)) + 1j * rng.standard_normal(len(supp))
            v = u + noise * pert / np.linalg.norm(pert)
            gain = rng.uniform(0.5, 2.0) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi))
            x = np.zeros(n, dtype=complex)
            x[supp] = gain * v
            iq.append(x)
            labels.append(c)
    iq, labels = np.array(iq), np.array(labels)
    is_train = np.ones(len(labels), dtype=bool)
    n_test = max(1, per_class // 5)
    for c in (0, 1):
        members = np.flatnonzero(labels == c)
        is_train[rng.permutation(members)[:n_test]] = False
    return Dataset(iq, labels, is_train, 2, seed), theta_ref
