"""Operator targets for the cascade and the multiuser sum-rate score."""

from __future__ import annotations

import numpy as np

from simwave.errors import DomainError

RANK_COND_LIMIT = 1e12


def zf_target(H: np.ndarray, power: float = 1.0) -> np.ndarray:
    """Zero-forcing precoder ``H^H (H H^H)^-1`` scaled to ``||T||_F^2 = power``."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] > H.shape[1]:
        raise DomainError(f"H must be a wide matrix (users x antennas), got shape {H.shape}")
    cond = np.linalg.cond(H)
    if not np.isfinite(cond) or cond > RANK_COND_LIMIT:
        raise DomainError(f"H is rank deficient (condition number {cond:.3e})")
    T = H.conj().T @ np.linalg.inv(H @ H.conj().T)
    return T * np.sqrt(power / np.vdot(T, T).real)


def dft_target(n: int) -> np.ndarray:
    """Unitary DFT matrix with entries ``exp(-j 2 pi k m / n) / sqrt(n)``."""
    if int(n) < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def sum_rate(H: np.ndarray, precoder: np.ndarray, noise_power: float) -> float:
    """Sum over users of ``log2(1 + SINR_k)`` in bits/s/Hz.

    User ``k`` sees row ``k`` of ``H``; stream ``i`` is column ``i`` of the precoder.
    """
    H = np.asarray(H)
    P = np.asarray(precoder)
    if H.ndim != 2 or P.ndim != 2 or H.shape[1] != P.shape[0] or P.shape[1] != H.shape[0]:
        raise DomainError(f"shapes {H.shape} and {P.shape} do not compose to a square gain matrix")
    if not noise_power > 0:
        raise DomainError("noise_power must be > 0")
    gains = np.abs(H @ P) ** 2
    signal = np.diag(gains)
    interference = gains.sum(axis=1) - signal
    return float(np.sum(np.log2(1.0 + signal / (interference + noise_power))))
