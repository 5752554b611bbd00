"""Ground-truth physical model for the uplink.

Steering vectors, free-space path gain, the per-drone gain/Doppler diagonal,
channel matrix synthesis, MPSK symbols, noisy received vectors and stacked
pilot observations.  The gain/Doppler diagonal is held constant over a frame
(drone motion within one frame is negligible at the modeled symbol rates),
so the subframe index never enters the phase.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import DroneParams, SystemConfig
from .rng import complex_normal


def steering_vector(doa: float, cfg: SystemConfig) -> np.ndarray:
    """ULA response for a plane wave from angle ``doa`` (radians).

    Entry n (1-based) is exp(-j 2 pi (n-1) d0 sin(doa) / lambda); every
    entry has unit modulus.
    """
    n = np.arange(cfg.n_antennas)
    phase = -2.0 * np.pi * n * cfg.element_spacing * np.sin(doa) / cfg.wavelength
    return np.exp(1j * phase)


def path_gain(range_m: float, cfg: SystemConfig) -> float:
    """Free-space amplitude gain lambda / (4 pi d)."""
    if range_m <= 0:
        raise ValueError("range_m must be positive")
    return cfg.wavelength / (4.0 * np.pi * range_m)


def doppler_phasor(doppler: float, cfg: SystemConfig) -> complex:
    """Frame-constant Doppler phase term exp(j 2 pi f_D / f_s)."""
    return np.exp(2j * np.pi * doppler / cfg.sample_rate)


def omega_matrix(drones: Sequence[DroneParams], cfg: SystemConfig) -> np.ndarray:
    """Diagonal K x K matrix of path gain times Doppler phasor per drone."""
    if len(drones) == 0:
        raise ValueError("drone list must be nonempty")
    diag = np.array(
        [path_gain(d.range_m, cfg) * doppler_phasor(d.doppler, cfg) for d in drones]
    )
    return np.diag(diag)


@dataclass(frozen=True)
class ChannelMatrix:
    """N x K line-of-sight channel; column k has norm sqrt(N) * eta_k."""

    entries: np.ndarray
    drone_count: int


def channel_matrix(drones: Sequence[DroneParams], cfg: SystemConfig) -> ChannelMatrix:
    """Channel H = A * omega: steering columns scaled by gain and Doppler."""
    a = np.column_stack([steering_vector(d.doa, cfg) for d in drones])
    h = a @ omega_matrix(drones, cfg)
    return ChannelMatrix(entries=h, drone_count=len(drones))


def channel_from_parameters(
    doas: np.ndarray,
    ranges: np.ndarray,
    dopplers: np.ndarray,
    cfg: SystemConfig,
    gain_ref: float = 1.0,
) -> np.ndarray:
    """Channel matrix from raw parameter arrays, columns scaled by 1/gain_ref.

    Unlike :func:`channel_matrix` this skips the DroneParams domain checks,
    which matters when reconstructing from noisy estimates that may fall
    slightly outside the nominal parameter domains.
    """
    doas = np.atleast_1d(np.asarray(doas, dtype=float))
    ranges = np.atleast_1d(np.asarray(ranges, dtype=float))
    dopplers = np.atleast_1d(np.asarray(dopplers, dtype=float))
    n = np.arange(cfg.n_antennas)[:, None]
    a = np.exp(
        -2j * np.pi * n * cfg.element_spacing * np.sin(doas)[None, :] / cfg.wavelength
    )
    gains = cfg.wavelength / (4.0 * np.pi * ranges) / gain_ref
    phasors = np.exp(2j * np.pi * dopplers / cfg.sample_rate)
    return a * (gains * phasors)[None, :]


def mpsk_symbol(index: int, order: int) -> complex:
    """Unit-modulus MPSK point exp(j 2 pi (index-1) / order), index in 1..order."""
    if not 1 <= index <= order:
        raise ValueError(f"symbol index must be in 1..{order}, got {index}")
    return np.exp(2j * np.pi * (index - 1) / order)


def mpsk_alphabet(order: int) -> np.ndarray:
    """All MPSK points, index m at position m-1."""
    return np.exp(2j * np.pi * np.arange(order) / order)


def received_signal(
    drones: Sequence[DroneParams],
    cfg: SystemConfig,
    symbols: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """One received vector y = H diag(sqrt(P)) s + n.

    ``symbols`` are unit-modulus; the per-drone sqrt(power) scaling is
    applied here so callers never double-scale.  Noise is circular complex
    Gaussian with per-antenna variance cfg.noise_variance.
    """
    symbols = np.asarray(symbols)
    if symbols.shape != (len(drones),):
        raise ValueError(f"expected {len(drones)} symbols, got shape {symbols.shape}")
    h = channel_matrix(drones, cfg).entries
    amps = np.sqrt(np.array([d.power for d in drones]))
    clean = h @ (amps * symbols)
    noise = complex_normal(rng, cfg.noise_variance, cfg.n_antennas)
    return clean + noise


def pilot_stack(
    drones: Sequence[DroneParams],
    cfg: SystemConfig,
    n_pilots: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vertical stack of ``n_pilots`` noisy all-ones pilot observations.

    The noiseless stack is n_pilots repeated copies of H sqrt(P) 1 because
    the gain/Doppler diagonal is frame-constant.
    """
    if n_pilots < 1:
        raise ValueError("n_pilots must be >= 1")
    h = channel_matrix(drones, cfg).entries
    amps = np.sqrt(np.array([d.power for d in drones]))
    clean = h @ amps
    noise = complex_normal(rng, cfg.noise_variance, (n_pilots, cfg.n_antennas))
    return (clean[None, :] + noise).ravel()


def noiseless_pilot_stack(
    doas: np.ndarray,
    ranges: np.ndarray,
    dopplers: np.ndarray,
    powers: np.ndarray,
    cfg: SystemConfig,
    n_pilots: int,
) -> np.ndarray:
    """Pilot-stack mean for candidate parameters (the localization model)."""
    h = channel_from_parameters(doas, ranges, dopplers, cfg)
    clean = h @ np.sqrt(np.asarray(powers, dtype=float))
    return np.tile(clean, n_pilots)
