"""Core configuration types: array geometry, per-drone parameters, frame layout.

Angles are radians everywhere inside the library; degrees are accepted only
at the scenario-file boundary.  All physical quantities are SI (m, Hz, W).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class SystemConfig:
    """Receiver-side constants: uniform linear array plus noise level.

    Attributes:
        n_antennas: number of ULA elements.
        wavelength: carrier wavelength in meters.
        sample_rate: symbol-rate clock in Hz (Doppler phase reference).
        noise_variance: per-antenna complex noise variance in watts.
        element_spacing: inter-element spacing in meters; defaults to half
            a wavelength.
    """

    n_antennas: int
    wavelength: float
    sample_rate: float
    noise_variance: float
    element_spacing: float = field(default=0.0)

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError(f"n_antennas must be >= 1, got {self.n_antennas}")
        for name in ("wavelength", "sample_rate"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be >= 0")
        if self.element_spacing == 0.0:
            object.__setattr__(self, "element_spacing", self.wavelength / 2.0)
        elif self.element_spacing < 0:
            raise ValueError("element_spacing must be positive")

    def with_noise(self, noise_variance: float) -> "SystemConfig":
        return SystemConfig(
            n_antennas=self.n_antennas,
            wavelength=self.wavelength,
            sample_rate=self.sample_rate,
            noise_variance=noise_variance,
            element_spacing=self.element_spacing,
        )


@dataclass(frozen=True)
class DroneParams:
    """One transmitter's ground-truth location parameters and power.

    doa is the direction of arrival in radians, restricted to the open
    interval (-pi/2, pi/2) so the ULA response is unambiguous.  doppler must
    stay below the Nyquist band of the sample clock so the per-frame phase
    term is unambiguous.
    """

    doa: float
    range_m: float
    doppler: float
    power: float

    def __post_init__(self):
        if not abs(self.doa) < math.pi / 2:
            raise ValueError(f"doa must satisfy |doa| < pi/2, got {self.doa}")
        if self.range_m <= 0:
            raise ValueError("range_m must be positive")
        if self.power <= 0:
            raise ValueError("power must be positive")

    def validate_against(self, cfg: SystemConfig) -> None:
        if not abs(self.doppler) < cfg.sample_rate / 2:
            raise ValueError(
                f"|doppler| = {abs(self.doppler)} must be below "
                f"sample_rate/2 = {cfg.sample_rate / 2}"
            )


@dataclass(frozen=True)
class FrameConfig:
    """Frame layout: L subframes, T data symbols per subframe, MPSK order.

    Subframe l has l pilot vectors available for localization; pilots are
    the all-ones symbol for every drone.
    """

    n_subframes: int
    symbols_per_subframe: int
    modulation_order: int

    def __post_init__(self):
        if self.n_subframes < 1:
            raise ValueError("n_subframes must be >= 1")
        if self.symbols_per_subframe < 1:
            raise ValueError("symbols_per_subframe must be >= 1")
        m = self.modulation_order
        if m < 2 or (m & (m - 1)) != 0:
            raise ValueError(f"modulation_order must be a power of 2 >= 2, got {m}")
