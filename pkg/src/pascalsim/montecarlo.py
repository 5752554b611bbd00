"""End-to-end trial execution and campaign sweeps.

A trial synthesizes one frame: pilot observations, localization (either the
full AO-ML estimator or a draw from a calibrated Gaussian error model),
parametric channel reconstruction, equalization of every data symbol and
per-drone error counting.  Campaigns aggregate trials across an axis (SNR,
pilot count, drone count or the communication/localization resource ratio,
which in this architecture is a no-op by design).

All randomness is routed through counter-based substreams keyed by
(campaign seed, axis index, trial id, stream tag), so results are invariant
to trial ordering and worker count.

Equalizers operate on receive-gain-normalized channels: columns are divided
by the RMS free-space gain of the scenario's drones and the noise variance
is scaled accordingly.  Detection is invariant to that common scaling for
all three equalizer families; it is what makes the nominal series diagonal
N*I meaningful for the truncated modes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .analytic.context import ApproxConfig, gain_reference
from .config import DroneParams, FrameConfig, SystemConfig
from .equalize import (
    MMSE,
    MRC,
    ZF,
    mmse_weights_exact,
    mmse_weights_neumann,
    mrc_weights,
    zf_weights_exact,
    zf_weights_neumann,
)
from .equalize import detect_mpsk, equalize_apply
from .errors import IllConditioned, PascalError
from .localization import (
    LocalizationErrorModel,
    LocationEstimate,
    SolverOptions,
    ao_ml_estimate,
    rmse,
    sample_errors,
)
from .rng import (
    STREAM_DATA,
    STREAM_ERRORS,
    STREAM_PILOT,
    STREAM_SYMBOLS,
    complex_normal,
    substream,
)
from .signal_model import channel_from_parameters, mpsk_alphabet, pilot_stack

AO_ML = "ao-ml"
SAMPLED = "sampled"

MAX_SKIP_FRACTION = 0.01


@dataclass(frozen=True)
class EqualizerSpec:
    kind: str
    mode: str = "exact"  # "exact" or "neumann"

    def __post_init__(self):
        if self.kind not in (MRC, ZF, MMSE):
            raise ValueError(f"unknown equalizer kind {self.kind!r}")
        if self.mode not in ("exact", "neumann"):
            raise ValueError(f"unknown equalizer mode {self.mode!r}")

    @property
    def label(self) -> str:
        return self.kind


@dataclass(frozen=True)
class Scenario:
    """A fully specified simulation: physics, error source, detection, size.

    The seed determines every random quantity in the campaign.  snr_db, when
    set, overrides the config's noise variance through the per-drone
    receive-SNR definition P_k eta_k^2 / sigma_n^2 averaged over drones.
    """

    cfg: SystemConfig
    drones: tuple[DroneParams, ...]
    frame: FrameConfig
    error_mode: str
    equalizers: tuple[EqualizerSpec, ...]
    approx: ApproxConfig = field(default_factory=ApproxConfig)
    error_model: LocalizationErrorModel | None = None
    calibration_trials: int = 0
    n_pilots: int | None = None
    n_trials: int = 1000
    seed: int = 0
    snr_db: float | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        object.__setattr__(self, "drones", tuple(self.drones))
        object.__setattr__(self, "equalizers", tuple(self.equalizers))
        if self.error_mode not in (AO_ML, SAMPLED):
            raise ValueError(f"unknown error mode {self.error_mode!r}")
        if self.error_mode == SAMPLED and self.error_model is None \
                and self.calibration_trials <= 0:
            raise ValueError(
                "sampled mode needs an error model or calibration_trials > 0"
            )
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not self.equalizers:
            raise ValueError("at least one equalizer must be selected")
        for d in self.drones:
            d.validate_against(self.cfg)

    @property
    def pilots(self) -> int:
        return self.n_pilots if self.n_pilots is not None else self.frame.n_subframes

    def noise_variance(self) -> float:
        if self.snr_db is None:
            return self.cfg.noise_variance
        gains = np.array([
            self.cfg.wavelength / (4.0 * np.pi * d.range_m) for d in self.drones
        ])
        powers = np.array([d.power for d in self.drones])
        return float(np.mean(powers * gains**2) / 10.0 ** (self.snr_db / 10.0))

    def resolved_cfg(self) -> SystemConfig:
        return self.cfg.with_noise(self.noise_variance())


@dataclass
class SerResult:
    """SER point estimate with trial bookkeeping and a 95% interval."""

    ser: float
    errors_counted: int
    symbols_counted: int
    ci95_halfwidth: float
    per_drone_errors: np.ndarray
    per_drone_symbols: np.ndarray

    @property
    def per_drone_ser(self) -> np.ndarray:
        return self.per_drone_errors / np.maximum(self.per_drone_symbols, 1)

    def per_drone_ci95(self) -> np.ndarray:
        return np.array([
            _ci95(int(e), int(s))
            for e, s in zip(self.per_drone_errors, self.per_drone_symbols)
        ])


def _ci95(errors: int, symbols: int) -> float:
    """Normal-approximation interval, widened by the rule of three when the
    error count is too small for the CLT to be trusted."""
    if symbols == 0:
        return 0.0
    p = errors / symbols
    half = 1.96 * np.sqrt(max(p * (1.0 - p), 0.0) / symbols)
    if errors < 5:
        half = max(half, 3.0 / symbols)
    return float(half)


def _weights_for(spec: EqualizerSpec, h_hat: np.ndarray, noise_var: float,
                 symbol_power: float, order: int):
    if spec.kind == MRC:
        return mrc_weights(h_hat)
    if spec.kind == ZF:
        if spec.mode == "exact":
            return zf_weights_exact(h_hat)
        return zf_weights_neumann(h_hat, order)
    if spec.mode == "exact":
        return mmse_weights_exact(h_hat, noise_var, symbol_power)
    return mmse_weights_neumann(h_hat, noise_var, symbol_power, order)


def run_trial(
    scenario: Scenario,
    trial_id: int,
    axis_index: int = 0,
    error_model: LocalizationErrorModel | None = None,
) -> dict:
    """One frame: localize, reconstruct, equalize, detect, count.

    Returns per-equalizer (errors, symbols) arrays per drone plus the
    location estimate when the AO-ML path ran.  Deterministic given
    (scenario.seed, axis_index, trial_id).  Raises IllConditioned when an
    exact Gram inversion fails; callers decide whether to skip.
    """
    cfg = scenario.resolved_cfg()
    drones = scenario.drones
    k = len(drones)
    seed = scenario.seed
    model = error_model if error_model is not None else scenario.error_model

    truth = np.array([[d.doa, d.range_m, d.doppler] for d in drones])
    powers = np.array([d.power for d in drones])

    estimate: LocationEstimate | None = None
    if scenario.error_mode == AO_ML:
        rng_pilot = substream(seed, axis_index, trial_id, STREAM_PILOT)
        pilots = pilot_stack(drones, cfg, scenario.pilots, rng_pilot)
        estimate = ao_ml_estimate(pilots, cfg, powers, prior=truth,
                                  opts=scenario.solver)
        psi_hat = estimate.as_array()
    else:
        if model is None:
            raise ValueError("sampled mode requires an error model")
        rng_err = substream(seed, axis_index, trial_id, STREAM_ERRORS)
        psi_hat = truth + sample_errors(model, rng_err)

    gref = gain_reference(drones, cfg)
    noise_norm = cfg.noise_variance / gref**2
    gains = np.array([
        cfg.wavelength / (4.0 * np.pi * d.range_m) for d in drones
    ]) / gref
    symbol_power = float(np.mean(powers * gains**2))

    h_true = channel_from_parameters(
        truth[:, 0], truth[:, 1], truth[:, 2], cfg, gain_ref=gref
    )
    h_hat = channel_from_parameters(
        psi_hat[:, 0], psi_hat[:, 1], psi_hat[:, 2], cfg, gain_ref=gref
    )

    t_sym = scenario.frame.symbols_per_subframe
    m_order = scenario.frame.modulation_order
    rng_sym = substream(seed, axis_index, trial_id, STREAM_SYMBOLS)
    idx = rng_sym.integers(1, m_order + 1, size=(k, t_sym))
    alphabet = mpsk_alphabet(m_order)
    s = alphabet[idx - 1]

    rng_data = substream(seed, axis_index, trial_id, STREAM_DATA)
    noise = complex_normal(rng_data, noise_norm, (cfg.n_antennas, t_sym))
    y = h_true @ (np.sqrt(powers)[:, None] * s) + noise

    counts = {}
    for spec in scenario.equalizers:
        w = _weights_for(spec, h_hat, noise_norm, symbol_power,
                         scenario.approx.neumann_order)
        x = equalize_apply(w, y)
        decided = detect_mpsk(x, m_order)
        errors = np.sum(decided != idx, axis=1)
        counts[spec.label] = (
            errors.astype(int),
            np.full(k, t_sym, dtype=int),
        )
    return {"counts": counts, "estimate": estimate}


def _calibrated_model(scenario: Scenario, axis_index: int) -> LocalizationErrorModel | None:
    if scenario.error_mode != SAMPLED or scenario.error_model is not None:
        return None if scenario.error_model is not None else _fit_model(scenario, axis_index)
    return None


def _fit_model(scenario: Scenario, axis_index: int) -> LocalizationErrorModel:
    """Calibrate the Gaussian error model by running AO-ML trials."""
    cal = replace(
        scenario, error_mode=AO_ML, n_trials=scenario.calibration_trials,
    )
    table = measure_localization_rmse(cal, axis_index=axis_index, stream_offset=10_000)
    cfg = scenario.resolved_cfg()
    return LocalizationErrorModel.from_sigmas(
        table[:, 0], table[:, 1], table[:, 2], cfg,
        ranges=[d.range_m for d in scenario.drones],
    )


def estimate_ser(
    scenario: Scenario,
    axis_index: int = 0,
    jobs: int = 1,
    collect_estimates: bool = False,
) -> dict:
    """Aggregate run_trial over n_trials for every selected equalizer.

    Returns {"results": {label: SerResult}, "rmse": (K,3) or None,
    "skipped": count, "model": the error model used}.  Ill-conditioned
    trials are skipped and counted; more than 1% of them aborts the
    campaign with IllConditioned.
    """
    model = scenario.error_model
    if scenario.error_mode == SAMPLED and model is None:
        model = _fit_model(scenario, axis_index)

    k = len(scenario.drones)
    totals = {spec.label: (np.zeros(k, dtype=int), np.zeros(k, dtype=int))
              for spec in scenario.equalizers}
    estimates: list[LocationEstimate] = []
    skipped = 0

    def fold(result):
        nonlocal skipped
        if result is None:
            skipped += 1
            return
        for label, (err, sym) in result["counts"].items():
            totals[label][0][:] += err
            totals[label][1][:] += sym
        if result["estimate"] is not None and collect_estimates:
            estimates.append(result["estimate"])

    if jobs > 1:
        import multiprocessing as mp

        with mp.Pool(jobs) as pool:
            args = [(scenario, t, axis_index, model) for t in range(scenario.n_trials)]
            for res in pool.starmap(_guarded_trial, args, chunksize=32):
                fold(res)
    else:
        for t in range(scenario.n_trials):
            fold(_guarded_trial(scenario, t, axis_index, model))

    if skipped > max(MAX_SKIP_FRACTION * scenario.n_trials, 0):
        raise IllConditioned(float("nan"))

    results = {}
    for label, (err, sym) in totals.items():
        tot_e, tot_s = int(err.sum()), int(sym.sum())
        results[label] = SerResult(
            ser=tot_e / tot_s if tot_s else 0.0,
            errors_counted=tot_e,
            symbols_counted=tot_s,
            ci95_halfwidth=_ci95(tot_e, tot_s),
            per_drone_errors=err.copy(),
            per_drone_symbols=sym.copy(),
        )

    rmse_table = None
    if estimates:
        truth = np.array([[d.doa, d.range_m, d.doppler] for d in scenario.drones])
        rmse_table = rmse(estimates, truth)
    return {"results": results, "rmse": rmse_table, "skipped": skipped,
            "model": model}


def _guarded_trial(scenario, trial_id, axis_index, model):
    try:
        return run_trial(scenario, trial_id, axis_index, error_model=model)
    except IllConditioned:
        return None


def measure_localization_rmse(
    scenario: Scenario,
    axis_index: int = 0,
    stream_offset: int = 0,
) -> np.ndarray:
    """Per-parameter, per-drone RMSE of AO-ML over the scenario's trials.

    Doubles as the calibration source for the sampled-error model.
    """
    if scenario.error_mode != AO_ML:
        raise ValueError("localization RMSE requires the ao-ml error mode")
    cfg = scenario.resolved_cfg()
    truth = np.array([[d.doa, d.range_m, d.doppler] for d in scenario.drones])
    powers = np.array([d.power for d in scenario.drones])
    estimates = []
    for t in range(scenario.n_trials):
        rng_pilot = substream(scenario.seed, axis_index, t + stream_offset, STREAM_PILOT)
        pilots = pilot_stack(scenario.drones, cfg, scenario.pilots, rng_pilot)
        estimates.append(
            ao_ml_estimate(pilots, cfg, powers, prior=truth, opts=scenario.solver)
        )
    return rmse(estimates, truth)


SWEEP_AXES = ("snr", "pilots", "drones", "ratio")


def _scenario_for(base: Scenario, axis: str, value) -> Scenario:
    if axis == "snr":
        return replace(base, snr_db=float(value))
    if axis == "pilots":
        return replace(base, n_pilots=int(value))
    if axis == "drones":
        count = int(value)
        if not 1 <= count <= len(base.drones):
            raise ValueError(f"drone count {count} outside scenario's list")
        drones = base.drones[:count]
        model = base.error_model
        if model is not None:
            model = LocalizationErrorModel(
                sigma_theta=model.sigma_theta[:count],
                sigma_range=model.sigma_range[:count],
                sigma_doppler=model.sigma_doppler[:count],
                theta_bounds=model.theta_bounds,
                doppler_bounds=model.doppler_bounds[:count],
                range_bounds=model.range_bounds[:count],
            )
        return replace(base, drones=drones, error_model=model)
    if axis == "ratio":
        # Communication and localization share the same signal here, so the
        # resource split has nothing to reallocate; the axis exists to make
        # that invariance measurable.
        return base
    raise ValueError(f"unknown sweep axis {axis!r}; choose from {SWEEP_AXES}")


@dataclass
class SweepRow:
    axis_value: float
    results: dict
    rmse: np.ndarray | None
    model: LocalizationErrorModel | None
    skipped: int


def sweep_campaign(
    base: Scenario,
    axis: str,
    values: Sequence,
    jobs: int = 1,
    collect_rmse: bool | None = None,
) -> list[SweepRow]:
    """One estimate_ser per axis value, with per-value derived seeds.

    When the scenario localizes with AO-ML (directly or through
    calibration), the per-value RMSE table rides along.
    """
    if len(values) == 0:
        raise ValueError("sweep needs at least one axis value")
    rows = []
    want_rmse = collect_rmse if collect_rmse is not None \
        else base.error_mode == AO_ML
    for idx, value in enumerate(values):
        scen = _scenario_for(base, axis, value)
        out = estimate_ser(scen, axis_index=idx, jobs=jobs,
                           collect_estimates=want_rmse)
        rmse_table = out["rmse"]
        if rmse_table is None and scen.error_mode == SAMPLED \
                and out["model"] is not None and scen.error_model is None:
            model = out["model"]
            rmse_table = np.column_stack([
                model.sigma_theta, model.sigma_range, model.sigma_doppler,
            ])
        rows.append(SweepRow(
            axis_value=float(value),
            results=out["results"],
            rmse=rmse_table,
            model=out["model"],
            skipped=out["skipped"],
        ))
    return rows
