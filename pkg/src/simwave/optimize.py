"""Phase gradients through the cascade, first-order updates and operator fitting.

Gradient convention: a real loss ``L(G)`` is described by its Wirtinger
derivative ``D = dL/d conj(G)``. The derivative with respect to one phase is

    dL/dtheta = 2 Re < D, dG/dtheta >,      <X, Y> = sum(conj(X) * Y)

and ``dG/dtheta_{l,m} = j exp(j theta_{l,m}) left[l][:, m] right[l][m, :]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from simwave.core import PhaseProfile, PropagationSet, cascade_response, quantize_phases
from simwave.errors import DomainError, NumericalError

OPTIMIZERS = ("plain-gradient", "adaptive-moment")
QUANT_SCHEDULES = ("none", "final", "per_epoch")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 32
    optimizer: str = "adaptive-moment"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    quantization_bits: int | None = None
    quantization_schedule: str = "none"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DomainError(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.epochs) < 1 or int(self.batch_size) < 1:
            raise DomainError("epochs and batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise DomainError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise DomainError("beta1 and beta2 must lie in (0, 1)")
        if not self.epsilon > 0:
            raise DomainError("epsilon must be > 0")
        if self.quantization_schedule not in QUANT_SCHEDULES:
            raise DomainError(f"quantization_schedule must be one of {QUANT_SCHEDULES}")
        if self.quantization_bits is not None and int(self.quantization_bits) < 1:
            raise DomainError("quantization_bits must be >= 1")
        if self.quantization_schedule != "none" and self.quantization_bits is None:
            raise DomainError("a quantization schedule needs quantization_bits")


def phase_gradient(resp, loss_grad_G: np.ndarray) -> np.ndarray:
    """Real gradient of the loss with respect to every phase, shape (layers, elements)."""
    D = np.asarray(loss_grad_G)
    if D.shape != resp.G.shape:
        raise DomainError(f"loss gradient shape {D.shape} does not match G {resp.G.shape}")
    out = np.empty(resp.screens.shape)
    for l, (left, right) in enumerate(zip(resp.left, resp.right)):
        # diag(left^H D right^H) without forming the full product
        inner = np.einsum("ij,ij->i", left.conj().T @ D, right.conj())
        out[l] = 2.0 * np.real(1j * resp.screens[l] * np.conj(inner))
    return out


# -- losses -----------------------------------------------------------------
# A loss maps G to (value, dL/d conj(G)).

LossFn = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


def quadratic_loss(target: np.ndarray) -> LossFn:
    """``||G - T||_F^2``."""
    target = np.asarray(target, dtype=complex)

    def loss(G):
        r = G - target
        return float(np.vdot(r, r).real), r
    return loss


def optimal_scale(G: np.ndarray, target: np.ndarray) -> complex:
    """Complex gain ``<G, T> / ||G||^2`` minimizing ``||a G - T||``."""
    g2 = np.vdot(G, G).real
    if g2 == 0:
        return 0j
    return complex(np.vdot(G, target) / g2)


def scaled_nmse_loss(target: np.ndarray) -> LossFn:
    """``||a G - T||^2 / ||T||^2`` with the optimal complex gain ``a``.

    ``a`` is stationary, so the gradient is taken with ``a`` held fixed.
    """
    target = np.asarray(target, dtype=complex)
    t2 = np.vdot(target, target).real
    if t2 == 0:
        raise DomainError("target has zero Frobenius norm")

    def loss(G):
        a = optimal_scale(G, target)
        r = a * G - target
        return float(np.vdot(r, r).real / t2), np.conj(a) * r / t2
    return loss


# -- finite differences ---------------------------------------------------------

@dataclass(frozen=True)
class GradientReport:
    analytic: np.ndarray
    finite_difference: np.ndarray
    max_rel_error: float


def finite_difference_check(props: PropagationSet, phases: PhaseProfile, loss: LossFn,
                            step: float = 1e-6) -> GradientReport:
    """Compare ``phase_gradient`` with central differences on every phase."""
    if not step > 0:
        raise DomainError("step must be > 0")
    theta = np.array(phases.phases)
    resp = cascade_response(props, theta)
    _, D = loss(resp.G)
    analytic = phase_gradient(resp, D)

    fd = np.empty_like(theta)
    for idx in np.ndindex(theta.shape):
        plus = theta.copy()
        plus[idx] += step
        minus = theta.copy()
        minus[idx] -= step
        lp, _ = loss(cascade_response(props, plus).G)
        lm, _ = loss(cascade_response(props, minus).G)
        fd[idx] = (lp - lm) / (2.0 * step)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), 1e-12)
    err = float(np.max(np.abs(analytic - fd) / denom))
    return GradientReport(analytic, fd, err)


# -- updates ------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerState:
    t: int = 0
    m: np.ndarray | None = field(default=None, repr=False)
    v: np.ndarray | None = field(default=None, repr=False)


def step(phases, gradient: np.ndarray, config: TrainConfig,
         state: OptimizerState | None = None):
    """One first-order update. Returns ``(new_phases, new_state)``.

    ``phases`` may be a PhaseProfile (result is re-canonicalized) or a plain
    array of unconstrained parameters (used by the digital baseline).
    """
    state = state or OptimizerState()
    g = np.asarray(gradient, dtype=float)
    theta = phases.phases if isinstance(phases, PhaseProfile) else np.asarray(phases, dtype=float)
    if g.shape != theta.shape:
        raise DomainError(f"gradient shape {g.shape} does not match parameters {theta.shape}")
    lr = config.learning_rate
    if config.optimizer == "plain-gradient":
        new = theta - lr * g
        state = OptimizerState(state.t + 1)
    else:
        t = state.t + 1
        m = np.zeros_like(g) if state.m is None else state.m
        v = np.zeros_like(g) if state.v is None else state.v
        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * (g * g)
        m_hat = m / (1.0 - config.beta1 ** t)
        v_hat = v / (1.0 - config.beta2 ** t)
        new = theta - lr * m_hat / (np.sqrt(v_hat) + config.epsilon)
        state = OptimizerState(t, m, v)
    if isinstance(phases, PhaseProfile):
        return PhaseProfile(new), state
    return new, state


# -- operator fitting -----------------------------------------------------------

@dataclass
class FitResult:
    phases: PhaseProfile
    losses: list
    quantized_losses: list
    best_loss: float

    @property
    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(np.asarray(self.losses))


def fit_operator(props: PropagationSet, target: np.ndarray, config: TrainConfig,
                 init: PhaseProfile | None = None) -> FitResult:
    """Fit the cascade to ``target`` up to a complex gain (optimal-scaling NMSE).

    ``losses[e]`` is the NMSE at the phases entering epoch ``e`` (each epoch is
    one full-batch update). The returned phases are the best seen, including
    the point reached after the last update.
    """
    target = np.asarray(target, dtype=complex)
    if target.shape != (props.output_dim, props.input_dim):
        raise DomainError(f"target shape {target.shape} does not match G "
                          f"{(props.output_dim, props.input_dim)}")
    loss = scaled_nmse_loss(target)
    bits = config.quantization_bits
    schedule = config.quantization_schedule
    if init is None:
        rng = np.random.default_rng(config.seed)
        theta = PhaseProfile(rng.uniform(0.0, 2.0 * np.pi, size=(props.depth, props.per_layer)))
    else:
        theta = init

    def active(p):
        return quantize_phases(p, bits) if schedule == "per_epoch" else p

    def qloss(p):
        if bits is None:
            return float("nan")
        return loss(cascade_response(props, quantize_phases(p, bits)).G)[0]

    state = OptimizerState()
    losses, qlosses = [], []
    best, best_loss = None, np.inf
    for _ in range(config.epochs):
        point = active(theta)
        resp = cascade_response(props, point)
        value, D = loss(resp.G)
        if not np.isfinite(value):
            raise NumericalError("non-finite loss during operator fitting",
                                 partial=FitResult(theta, losses, qlosses, float("nan")))
        losses.append(value)
        qlosses.append(qloss(theta))
        if value < best_loss:
            best, best_loss = point, value
        theta, state = step(theta, phase_gradient(resp, D), config, state)
    point = active(theta)
    value = loss(cascade_response(props, point).G)[0]
    if value < best_loss:
        best, best_loss = point, value
    if schedule == "final":
        best = quantize_phases(best, bits)
        best_loss = loss(cascade_response(props, best).G)[0]
    return FitResult(best, losses, qlosses, float(best_loss))
