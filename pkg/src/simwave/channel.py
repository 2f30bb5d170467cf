"""Space-to-ground links between the SIM output aperture and the receive array."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from simwave.core import (SPEED_OF_LIGHT, TWO_PI, CascadeResponse, SimGeometry,
                          exit_aperture_positions)
from simwave.errors import DomainError


@dataclass(frozen=True)
class ChannelConfig:
    rx_count: int = 4
    distance: float = 150e3
    kappa: float = 10.0
    noise_power: float = 1.0
    seed: int = 0
    include_path_loss: bool = False
    atmospheric_loss_db: float = 0.0

    def __post_init__(self):
        if int(self.rx_count) < 1:
            raise DomainError(f"rx_count must be >= 1, got {self.rx_count}")
        if not self.distance > 0:
            raise DomainError(f"distance must be > 0, got {self.distance}")
        if not self.noise_power > 0:
            raise DomainError(f"noise_power must be > 0, got {self.noise_power}")
        if not self.kappa >= 0:
            raise DomainError(f"kappa must be >= 0, got {self.kappa}")


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray
    path_loss_linear: float = 1.0


def free_space_path_loss(carrier_freq: float, distance: float) -> float:
    """Friis amplitude factor lambda / (4 pi d); the power loss is its square."""
    if not (carrier_freq > 0 and distance > 0):
        raise DomainError("carrier frequency and distance must be positive")
    return (SPEED_OF_LIGHT / carrier_freq) / (4.0 * np.pi * distance)


def draw_rng(seed: int, draw: int) -> np.random.Generator:
    """Generator keyed on (seed, draw index), independent of call order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), int(draw)]))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """I.i.d. circularly symmetric CN(0, 1) samples."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def sample_rician(config: ChannelConfig, los: np.ndarray, draw: int = 0,
                  carrier_freq: float | None = None) -> ChannelRealization:
    """Rician mixture ``sqrt(k/(k+1)) los + sqrt(1/(k+1)) H_w`` for draw ``draw``.

    ``carrier_freq`` is only needed when the config includes path loss.
    """
    los = np.asarray(los, dtype=complex)
    if los.ndim != 2 or los.shape[0] != config.rx_count:
        raise DomainError(f"LOS matrix shape {los.shape} does not have {config.rx_count} rows")
    k = float(config.kappa)
    h_w = complex_gaussian(draw_rng(config.seed, draw), los.shape)
    H = np.sqrt(k / (k + 1.0)) * los + np.sqrt(1.0 / (k + 1.0)) * h_w
    gain = 1.0
    if config.include_path_loss:
        if carrier_freq is None:
            raise DomainError("carrier_freq is required when include_path_loss is set")
        gain = free_space_path_loss(carrier_freq, config.distance)
        gain *= 10.0 ** (-config.atmospheric_loss_db / 20.0)
    H.setflags(write=False)
    return ChannelRealization(H, gain)


def ground_array_positions(geometry: SimGeometry, config: ChannelConfig) -> np.ndarray:
    """Receive ULA along x at lambda/2 spacing, broadside at ``distance`` beyond the aperture."""
    k = config.rx_count
    pts = np.zeros((k, 3))
    pts[:, 0] = (np.arange(k) - (k - 1) / 2.0) * geometry.wavelength / 2.0
    pts[:, 2] = geometry.layers * geometry.layer_gap + config.distance
    return pts


def los_component(geometry: SimGeometry, rx_positions, aperture=None) -> np.ndarray:
    """Unit-modulus LOS phase matrix ``exp(j 2 pi r / lambda)``, rx x aperture.

    ``aperture`` defaults to the stack's exit aperture plane.
    """
    rx = np.atleast_2d(np.asarray(rx_positions, dtype=float))
    ap = exit_aperture_positions(geometry) if aperture is None else np.atleast_2d(aperture)
    if np.any(rx[:, 2][:, None] <= ap[:, 2][None, :]):
        raise DomainError("receive positions must lie beyond the aperture in z")
    diff = rx[:, None, :] - ap[None, :, :]
    r = np.sqrt(np.sum(diff * diff, axis=-1))
    if np.any(r <= 0):
        raise DomainError("coincident aperture and receive points")
    # reduce modulo lambda first: keeps the phase accurate at 150 km ranges
    frac = np.mod(r, geometry.wavelength) / geometry.wavelength
    return np.exp(1j * TWO_PI * frac)


def end_to_end(resp: CascadeResponse | np.ndarray, chan: ChannelRealization) -> np.ndarray:
    """Full input-to-receive-antenna operator ``path_loss * H @ G``."""
    G = resp.G if isinstance(resp, CascadeResponse) else np.asarray(resp)
    if chan.H.shape[1] != G.shape[0]:
        raise DomainError(f"channel width {chan.H.shape[1]} does not match cascade output {G.shape[0]}")
    return chan.path_loss_linear * (chan.H @ G)
