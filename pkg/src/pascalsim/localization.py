"""Alternating-optimization ML estimation of (doa, range, doppler) per drone.

The joint ML problem minimizes the squared residual between the stacked
pilot observation and its parametric mean.  It is split into per-drone
subproblems solved by a coarse 3-D grid followed by per-axis golden-section
refinement, cycled until the cost improvement stalls.  The residual cost is
non-increasing across sweeps by construction.

The Gaussian error model (per-parameter RMSE as standard deviation,
independent across parameters and drones) lives here too; the analytical
SER path samples from it instead of rerunning the estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import SystemConfig
from .signal_model import noiseless_pilot_stack

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SolverOptions:
    """Grid and refinement knobs for the per-drone subproblem."""

    doa_points: int = 181
    range_points: int = 41
    range_halfspan: float = 0.5  # fraction of the prior range
    doppler_points: int = 41
    doppler_span_div: float = 20.0  # grid covers prior +/- f_s / this
    golden_iters: int = 20
    tol: float = 1e-8
    max_sweeps: int = 50


@dataclass
class LocationEstimate:
    """AO-ML output: per-drone parameter estimates plus convergence record."""

    doa_hat: np.ndarray
    range_hat: np.ndarray
    doppler_hat: np.ndarray
    iterations: int
    converged: bool
    final_cost: float
    cost_history: np.ndarray = field(default_factory=lambda: np.array([]))

    def as_array(self) -> np.ndarray:
        """(K, 3) array with columns (doa, range, doppler)."""
        return np.column_stack([self.doa_hat, self.range_hat, self.doppler_hat])


def residual_cost(
    psi: np.ndarray,
    pilots: np.ndarray,
    powers: np.ndarray,
    cfg: SystemConfig,
) -> float:
    """Squared 2-norm of (pilot stack - parametric mean) at candidate psi.

    psi is (K, 3) with columns (doa, range, doppler).  The pilot count is
    inferred from the stack length.
    """
    psi = np.asarray(psi, dtype=float)
    n_pilots, rem = divmod(len(pilots), cfg.n_antennas)
    if rem != 0 or n_pilots < 1:
        raise ValueError("pilot stack length must be a positive multiple of n_antennas")
    mu = noiseless_pilot_stack(psi[:, 0], psi[:, 1], psi[:, 2], powers, cfg, n_pilots)
    diff = pilots - mu
    return float(np.real(np.vdot(diff, diff)))


def _drone_cost_terms(pilots: np.ndarray, psi: np.ndarray, powers: np.ndarray,
                      cfg: SystemConfig, k: int):
    """Residual against all drones except k, pre-summed over pilot blocks."""
    n_pilots = len(pilots) // cfg.n_antennas
    others = [i for i in range(len(powers)) if i != k]
    if others:
        idx = np.array(others)
        mu_other = noiseless_pilot_stack(
            psi[idx, 0], psi[idx, 1], psi[idx, 2], powers[idx], cfg, n_pilots
        )
    else:
        mu_other = np.zeros_like(pilots)
    y_res = pilots - mu_other
    blocks = y_res.reshape(n_pilots, cfg.n_antennas)
    return y_res, blocks.sum(axis=0), n_pilots


def _single_drone_cost(theta, d, f, z_sum, c0, power, cfg, n_pilots):
    """Cost of drone k's contribution given the block-summed residual.

    Broadcasts over grids: theta enters through z(theta) = a(theta)^H ybar,
    range through the gain, doppler through the frame phasor.
    """
    eta = cfg.wavelength / (4.0 * np.pi * d)
    phi = 2.0 * np.pi * f / cfg.sample_rate
    amp = np.sqrt(power) * eta
    cross = np.real(z_sum) * np.cos(phi) + np.imag(z_sum) * np.sin(phi)
    return c0 - 2.0 * amp * cross + n_pilots * cfg.n_antennas * power * eta**2


def subproblem_solve(
    pilots: np.ndarray,
    cfg: SystemConfig,
    powers: np.ndarray,
    psi: np.ndarray,
    k: int,
    prior: np.ndarray,
    opts: SolverOptions = SolverOptions(),
) -> tuple[float, float, float]:
    """Best (doa, range, doppler) for drone k with the others held fixed.

    Evaluates the full coarse grid exactly (vectorized), then refines each
    axis with bounded golden-section steps.  The returned triple never costs
    more than the best coarse-grid candidate.
    """
    powers = np.asarray(powers, dtype=float)
    y_res, ybar, n_pilots = _drone_cost_terms(pilots, psi, powers, cfg, k)
    c0 = float(np.real(np.vdot(y_res, y_res)))

    theta_grid = np.linspace(-np.pi / 2, np.pi / 2, opts.doa_points)
    d_prior, f_prior = prior[k, 1], prior[k, 2]
    d_grid = np.linspace(
        d_prior * (1.0 - opts.range_halfspan),
        d_prior * (1.0 + opts.range_halfspan),
        opts.range_points,
    )
    f_half = cfg.sample_rate / opts.doppler_span_div
    f_grid = np.linspace(f_prior - f_half, f_prior + f_half, opts.doppler_points)

    # Steering responses for every candidate angle against the summed blocks.
    n = np.arange(cfg.n_antennas)
    a_grid = np.exp(
        -2j * np.pi * np.sin(theta_grid)[:, None] * n[None, :]
        * cfg.element_spacing / cfg.wavelength
    )
    z = a_grid.conj() @ ybar  # z[i] = a(theta_i)^H ybar

    cost = _single_drone_cost(
        theta_grid[:, None, None], d_grid[None, :, None], f_grid[None, None, :],
        z[:, None, None], c0, powers[k], cfg, n_pilots,
    )
    it, id_, if_ = np.unravel_index(np.argmin(cost), cost.shape)
    best = np.array([theta_grid[it], d_grid[id_], f_grid[if_]])
    best_cost = float(cost[it, id_, if_])

    def point_cost(theta, d, f):
        zt = np.exp(2j * np.pi * np.sin(theta) * n * cfg.element_spacing
                    / cfg.wavelength) @ ybar
        return float(_single_drone_cost(theta, d, f, zt, c0, powers[k], cfg, n_pilots))

    steps = np.array([
        theta_grid[1] - theta_grid[0],
        d_grid[1] - d_grid[0],
        f_grid[1] - f_grid[0],
    ])
    lo_lim = np.array([-np.pi / 2 + 1e-9, 1e-9, -cfg.sample_rate / 2])
    hi_lim = np.array([np.pi / 2 - 1e-9, np.inf, cfg.sample_rate / 2])

    for axis in range(3):
        lo = max(best[axis] - steps[axis], lo_lim[axis])
        hi = min(best[axis] + steps[axis], hi_lim[axis])
        x1 = hi - _GOLDEN * (hi - lo)
        x2 = lo + _GOLDEN * (hi - lo)

        def axis_cost(x, axis=axis):
            p = best.copy()
            p[axis] = x
            return point_cost(*p)

        f1, f2 = axis_cost(x1), axis_cost(x2)
        for _ in range(opts.golden_iters):
            if f1 <= f2:
                hi, x2, f2 = x2, x1, f1
                x1 = hi - _GOLDEN * (hi - lo)
                f1 = axis_cost(x1)
            else:
                lo, x1, f1 = x1, x2, f2
                x2 = lo + _GOLDEN * (hi - lo)
                f2 = axis_cost(x2)
        xs, fs = (x1, f1) if f1 <= f2 else (x2, f2)
        if fs < best_cost:
            best[axis] = xs
            best_cost = fs

    return float(best[0]), float(best[1]), float(best[2])


def ao_ml_estimate(
    pilots: np.ndarray,
    cfg: SystemConfig,
    powers: np.ndarray,
    prior: np.ndarray,
    init: np.ndarray | None = None,
    opts: SolverOptions = SolverOptions(),
) -> LocationEstimate:
    """Coordinate-descent ML over per-drone parameter blocks.

    ``prior`` is a (K, 3) array of nominal parameters that centers the
    range and Doppler search grids.  When ``init`` is None the drones are
    initialized sequentially in decreasing-power order, each fitted against
    the residual of the drones initialized before it.

    Non-convergence is reported through ``converged=False``, never raised.
    """
    powers = np.asarray(powers, dtype=float)
    prior = np.asarray(prior, dtype=float)
    k_total = len(powers)

    if init is None:
        psi = prior.copy()
        # Until a drone is initialized it contributes nothing to the fit:
        # zero power removes its mean component.
        live = np.zeros(k_total, dtype=bool)
        order = np.argsort(-powers)
        for k in order:
            eff_powers = np.where(live, powers, 0.0)
            eff_powers[k] = powers[k]
            psi[k] = subproblem_solve(pilots, cfg, eff_powers, psi, k, prior, opts)
            live[k] = True
    else:
        psi = np.asarray(init, dtype=float).copy()

    cost = residual_cost(psi, pilots, powers, cfg)
    history = [cost]
    converged = False
    sweeps = 0
    for sweeps in range(1, opts.max_sweeps + 1):
        for k in range(k_total):
            psi[k] = subproblem_solve(pilots, cfg, powers, psi, k, prior, opts)
        new_cost = residual_cost(psi, pilots, powers, cfg)
        history.append(new_cost)
        improvement = cost - new_cost
        cost = new_cost
        if improvement <= opts.tol * max(abs(cost), 1e-30):
            converged = True
            break

    return LocationEstimate(
        doa_hat=psi[:, 0].copy(),
        range_hat=psi[:, 1].copy(),
        doppler_hat=psi[:, 2].copy(),
        iterations=sweeps,
        converged=converged,
        final_cost=cost,
        cost_history=np.array(history),
    )


def rmse(estimates: Sequence[LocationEstimate], truth: np.ndarray) -> np.ndarray:
    """Per-drone, per-parameter root mean square error over estimates.

    truth is (K, 3); the result has the same shape.
    """
    if len(estimates) == 0:
        raise ValueError("need at least one estimate")
    truth = np.asarray(truth, dtype=float)
    sq = np.zeros_like(truth)
    for est in estimates:
        err = est.as_array() - truth
        sq += err**2
    return np.sqrt(sq / len(estimates))


@dataclass(frozen=True)
class LocalizationErrorModel:
    """Per-drone standard deviations of the Gaussian estimation errors.

    A zero sigma means that parameter is estimated perfectly.  Samples are
    independent across parameters and drones.  Draws are truncated: angle
    errors to [-pi, pi], Doppler errors to doppler_bounds (default +/- 6
    sigma clipped to the Nyquist band), range errors to range_bounds
    (default +/- 6 sigma, clipped below the prior range when known so the
    path gain stays finite).
    """

    sigma_theta: np.ndarray
    sigma_range: np.ndarray
    sigma_doppler: np.ndarray
    theta_bounds: tuple[float, float] = (-np.pi, np.pi)
    doppler_bounds: np.ndarray | None = None
    range_bounds: np.ndarray | None = None

    def __post_init__(self):
        for name in ("sigma_theta", "sigma_range", "sigma_doppler"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if np.any(arr < 0):
                raise ValueError(f"{name} must be >= 0")
            object.__setattr__(self, name, arr)
        k = len(self.sigma_theta)
        if self.doppler_bounds is None:
            b = 6.0 * self.sigma_doppler
            object.__setattr__(self, "doppler_bounds",
                               np.column_stack([-b, b]))
        if self.range_bounds is None:
            b = 6.0 * self.sigma_range
            object.__setattr__(self, "range_bounds",
                               np.column_stack([-b, b]))
        for name in ("doppler_bounds", "range_bounds"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(k, 2)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_sigmas(
        cls,
        sigma_theta,
        sigma_range,
        sigma_doppler,
        cfg: SystemConfig | None = None,
        ranges=None,
    ) -> "LocalizationErrorModel":
        """Build a model with physically clipped truncation bounds."""
        st = np.atleast_1d(np.asarray(sigma_theta, dtype=float))
        sd = np.broadcast_to(np.asarray(sigma_range, dtype=float), st.shape).copy()
        sf = np.broadcast_to(np.asarray(sigma_doppler, dtype=float), st.shape).copy()
        fb = 6.0 * sf
        if cfg is not None:
            fb = np.minimum(fb, cfg.sample_rate / 2.0)
        db = 6.0 * sd
        if ranges is not None:
            db = np.minimum(db, 0.9 * np.asarray(ranges, dtype=float))
        return cls(
            sigma_theta=st,
            sigma_range=sd,
            sigma_doppler=sf,
            doppler_bounds=np.column_stack([-fb, fb]),
            range_bounds=np.column_stack([-db, db]),
        )

    @property
    def n_drones(self) -> int:
        return len(self.sigma_theta)


def _truncated_normal(rng, sigma, lo, hi, size):
    """Rejection-sampled zero-mean truncated normals, vectorized over size."""
    out = sigma * rng.standard_normal(size)
    bad = (out < lo) | (out > hi)
    while np.any(bad):
        out[bad] = (sigma * rng.standard_normal(size))[bad]
        bad = (out < lo) | (out > hi)
    return out


def sample_errors(model: LocalizationErrorModel, rng: np.random.Generator) -> np.ndarray:
    """One draw of (delta_doa, delta_range, delta_doppler) per drone, shape (K, 3)."""
    k = model.n_drones
    base = rng.standard_normal((k, 3))
    out = np.empty((k, 3))
    out[:, 0] = model.sigma_theta * base[:, 0]
    out[:, 1] = model.sigma_range * base[:, 1]
    out[:, 2] = model.sigma_doppler * base[:, 2]

    lo = np.column_stack([
        np.full(k, model.theta_bounds[0]),
        model.range_bounds[:, 0],
        model.doppler_bounds[:, 0],
    ])
    hi = np.column_stack([
        np.full(k, model.theta_bounds[1]),
        model.range_bounds[:, 1],
        model.doppler_bounds[:, 1],
    ])
    sig = np.column_stack([model.sigma_theta, model.sigma_range, model.sigma_doppler])
    bad = (out < lo) | (out > hi)
    while np.any(bad):
        redraw = sig * rng.standard_normal((k, 3))
        out[bad] = redraw[bad]
        bad = (out < lo) | (out > hi)
    return out
