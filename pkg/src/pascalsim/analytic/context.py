"""Approximation configuration and the evaluation context for the
closed-form SER pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..config import DroneParams, SystemConfig
from ..equalize import MMSE, MRC, ZF
from ..localization import LocalizationErrorModel

MAX_NEUMANN_ORDER = 8
MAX_TAYLOR_ORDER = 16
DEFAULT_TERM_BUDGET = 10_000_000


@dataclass(frozen=True)
class ApproxConfig:
    """Series orders and the symbol-power convention for the MMSE regularizer.

    The truncation orders are bounded (neumann <= 8, taylor <= 16) to cap
    the combinatorial cost of the closed-form sums.  symbol_power is the
    per-symbol power in receive-gain-normalized units; None means use the
    mean effective receive power of the drones.
    """

    neumann_order: int = 3
    taylor_order: int = 8
    symbol_power: float | None = None
    term_budget: int = DEFAULT_TERM_BUDGET

    def __post_init__(self):
        if not 0 <= self.neumann_order <= MAX_NEUMANN_ORDER:
            raise ValueError(f"neumann_order must be in 0..{MAX_NEUMANN_ORDER}")
        if not 0 <= self.taylor_order <= MAX_TAYLOR_ORDER:
            raise ValueError(f"taylor_order must be in 0..{MAX_TAYLOR_ORDER}")
        if self.symbol_power is not None and self.symbol_power <= 0:
            raise ValueError("symbol_power must be positive")
        if self.term_budget < 1:
            raise ValueError("term_budget must be positive")


@dataclass(frozen=True)
class MomentContext:
    """Everything the closed-form average-SER evaluation needs.

    The context is stated in physical units; the pipeline internally
    normalizes channel columns by the RMS path gain so the nominal Gram
    diagonal of the series expansion is exact for equal-range drones.
    beta is the 1-based MPSK symbol combination (m_1..m_K); operations that
    average over combinations ignore it.

    MRC is handled as the order-zero special case of the zero-forcing
    series, which has identical decisions.
    """

    cfg: SystemConfig
    drones: tuple[DroneParams, ...]
    error_model: LocalizationErrorModel
    modulation: int
    kind: str
    approx: ApproxConfig = field(default_factory=ApproxConfig)
    target: int = 0
    beta: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "drones", tuple(self.drones))
        if self.kind not in (MRC, ZF, MMSE):
            raise ValueError(f"kind must be one of mrc/zf/mmse, got {self.kind!r}")
        m = self.modulation
        if m < 2 or (m & (m - 1)) != 0:
            raise ValueError("modulation must be a power of 2 >= 2")
        if not 0 <= self.target < len(self.drones):
            raise ValueError("target drone index out of range")
        if self.error_model.n_drones != len(self.drones):
            raise ValueError("error model size does not match drone count")
        if self.beta is not None:
            beta = tuple(int(b) for b in self.beta)
            if len(beta) != len(self.drones) or any(not 1 <= b <= m for b in beta):
                raise ValueError("beta entries must be symbol indices in 1..M")
            object.__setattr__(self, "beta", beta)

    @property
    def n_drones(self) -> int:
        return len(self.drones)

    def with_beta(self, beta: Sequence[int]) -> "MomentContext":
        return MomentContext(
            cfg=self.cfg, drones=self.drones, error_model=self.error_model,
            modulation=self.modulation, kind=self.kind, approx=self.approx,
            target=self.target, beta=tuple(int(b) for b in beta),
        )


def gain_reference(drones: Sequence[DroneParams], cfg: SystemConfig) -> float:
    """RMS free-space gain across drones; the pipeline's normalization."""
    gains = np.array([cfg.wavelength / (4.0 * np.pi * d.range_m) for d in drones])
    return float(np.sqrt(np.mean(gains**2)))
