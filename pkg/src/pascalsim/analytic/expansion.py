"""Series expansion of the equalized decision variable on the phase lattice.

Builds lattice polynomials for the estimated Gram matrix, the truncated
weight row of the target drone, the post-equalization signal term nu and
its noise power Gamma.  The same polynomials serve two purposes: exact
pointwise evaluation at a given error draw (cross-checked against explicit
truncated-weight matrix products) and closed-form moment evaluation after
linearizing sin(theta + dth) about the true angle.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from ..config import SystemConfig
from ..equalize import MMSE, MRC
from .context import MomentContext, gain_reference
from .lattice import TermPoly


@dataclass(frozen=True)
class ExpansionCore:
    """Normalized scenario constants shared by all polynomial builders."""

    cfg: SystemConfig
    kind: str
    n: int
    k: int
    target: int
    order: int
    alpha: float  # regularizer in normalized units (0 for mrc/zf)
    c_diag: float  # nominal Gram diagonal: N, or N + alpha for mmse
    noise_var: float  # normalized noise variance
    gains: tuple[float, ...]  # per-drone gain / RMS gain
    amps: tuple[float, ...]  # sqrt transmit powers
    doas: tuple[float, ...]
    sines: tuple[float, ...]
    ranges: tuple[float, ...]
    dopplers: tuple[float, ...]
    c_unit: float  # 2 pi d0 / lambda
    f_unit: float  # 2 pi / f_s
    modulation: int
    budget: int


def build_core(ctx: MomentContext) -> ExpansionCore:
    cfg, drones = ctx.cfg, ctx.drones
    gref = gain_reference(drones, cfg)
    gains = tuple(
        cfg.wavelength / (4.0 * np.pi * d.range_m) / gref for d in drones
    )
    powers = np.array([d.power for d in drones])
    noise_var = cfg.noise_variance / gref**2
    if ctx.approx.symbol_power is not None:
        sym_power = ctx.approx.symbol_power
    else:
        sym_power = float(np.mean(powers * np.array(gains) ** 2))
    order = 0 if ctx.kind == MRC else ctx.approx.neumann_order
    alpha = noise_var / sym_power if ctx.kind == MMSE else 0.0
    return ExpansionCore(
        cfg=cfg,
        kind=ctx.kind,
        n=cfg.n_antennas,
        k=len(drones),
        target=ctx.target,
        order=order,
        alpha=alpha,
        c_diag=float(cfg.n_antennas) + alpha,
        noise_var=noise_var,
        gains=gains,
        amps=tuple(float(np.sqrt(d.power)) for d in drones),
        doas=tuple(float(d.doa) for d in drones),
        sines=tuple(float(np.sin(d.doa)) for d in drones),
        ranges=tuple(float(d.range_m) for d in drones),
        dopplers=tuple(float(d.doppler) for d in drones),
        c_unit=2.0 * np.pi * cfg.element_spacing / cfg.wavelength,
        f_unit=2.0 * np.pi / cfg.sample_rate,
        modulation=ctx.modulation,
        budget=ctx.approx.term_budget,
    )


def _unit(k: int, p: int) -> tuple:
    e = [0] * k
    e[p] = 1
    return tuple(e)


def _doppler_const(core: ExpansionCore, p: int) -> complex:
    return np.exp(1j * core.f_unit * core.dopplers[p])


def gram_entry_poly(core: ExpansionCore, i: int, j: int) -> TermPoly:
    """Estimated-channel Gram entry (col_i^H col_j) as a lattice polynomial."""
    k = core.k
    poly = TermPoly(k)
    amp_base = (
        core.gains[i] * core.gains[j]
        * _doppler_const(core, j) * np.conj(_doppler_const(core, i))
    )
    for n0 in range(core.n):
        iv = [0] * k
        iv[i] += n0
        iv[j] -= n0
        dv = [0] * k
        dv[i] -= 1
        dv[j] += 1
        ev = [0] * k
        ev[i] += 1
        ev[j] += 1
        poly.add_term(iv, dv, ev, amp_base)
    return poly


def _gram_matrix(core: ExpansionCore) -> list[list[TermPoly]]:
    return [
        [gram_entry_poly(core, i, j) for j in range(core.k)] for i in range(core.k)
    ]


def _series_weights(core: ExpansionCore) -> np.ndarray:
    """Coefficient of Gram^v in the collapsed truncated weight series.

    The order-R series sum_{r<=R} (I - G_D/C)^r / C telescopes binomially to
    sum_j (-1)^j C(R+1, j+1) G_D^j / C^(j+1); splitting G_D = Gram + alpha I
    and regrouping by Gram powers gives these scalars.
    """
    r_max = core.order
    w = np.zeros(r_max + 1)
    for v in range(r_max + 1):
        total = 0.0
        for j in range(v, r_max + 1):
            total += (
                (-1.0) ** j
                * comb(r_max + 1, j + 1)
                * comb(j, v)
                * core.alpha ** (j - v)
                / core.c_diag ** (j + 1)
            )
        w[v] = total
    return w


def weight_row_core_polys(core: ExpansionCore) -> list[TermPoly]:
    """Row vector sum_v w_v [Gram^v]_{target,:} as K polynomials."""
    k, tgt = core.k, core.target
    gram = _gram_matrix(core)
    weights = _series_weights(core)

    row = [TermPoly(k) for _ in range(k)]
    row[tgt] = TermPoly.const(k, 1.0)
    acc = [row[q].scaled(weights[0]) for q in range(k)]
    for v in range(1, core.order + 1):
        new_row = []
        for q in range(k):
            cell = TermPoly(k)
            for qp in range(k):
                if len(row[qp]) == 0:
                    continue
                cell.iadd(row[qp].mul(gram[qp][q], core.budget))
            new_row.append(cell)
        row = new_row
        for q in range(k):
            acc[q].iadd(row[q], scale=weights[v])
    return acc


def est_conj_entry(core: ExpansionCore, q: int, n0: int) -> TermPoly:
    """conj of estimated channel entry (antenna n0, drone q)."""
    k = core.k
    poly = TermPoly(k)
    iv = [0] * k
    iv[q] += n0
    dv = [0] * k
    dv[q] -= 1
    ev = [0] * k
    ev[q] += 1
    poly.add_term(iv, dv, ev, core.gains[q] * np.conj(_doppler_const(core, q)))
    return poly


def weight_entry_polys(core: ExpansionCore) -> list[TermPoly]:
    """Target-drone weight row, one polynomial per antenna."""
    acc = weight_row_core_polys(core)
    out = []
    for n0 in range(core.n):
        w = TermPoly(core.k)
        for q in range(core.k):
            w.iadd(acc[q].mul(est_conj_entry(core, q, n0), core.budget))
        out.append(w)
    return out


def true_channel_column(core: ExpansionCore, p: int) -> np.ndarray:
    """Error-free normalized channel column (constants, not lattice terms)."""
    n0 = np.arange(core.n)
    steer = np.exp(-1j * core.c_unit * n0 * core.sines[p])
    return core.gains[p] * _doppler_const(core, p) * steer


def nu_poly(core: ExpansionCore, beta: tuple[int, ...]) -> TermPoly:
    """Decision-variable polynomial, referenced to the target symbol phase.

    nu = sum_p sqrt(P_p) (w_target . h_p) s(m_p), derotated by s(m_target)
    so the error-free operating point sits in symbol-1's decision region.
    """
    k, m = core.k, core.modulation
    sym = np.exp(2j * np.pi * (np.array(beta) - 1) / m)
    sym = sym * np.conj(sym[core.target])
    acc = weight_row_core_polys(core)
    # h_mix[q][n0] = sum_p amp_p s_p conj(est col q)[n0] h_p[n0] collapses the
    # p and antenna sums against each core-row polynomial.
    out = TermPoly(k)
    for q in range(k):
        mix = TermPoly(k)
        for n0 in range(core.n):
            hval = 0.0 + 0.0j
            for p in range(k):
                hval += core.amps[p] * sym[p] * true_channel_column(core, p)[n0]
            entry = est_conj_entry(core, q, n0)
            mix.iadd(entry.scaled(hval))
        out.iadd(acc[q].mul(mix, core.budget))
    return out


def gamma_poly(core: ExpansionCore) -> TermPoly:
    """Noise-power polynomial Gamma = noise_var * sum_n |w_n|^2."""
    rows = weight_entry_polys(core)
    out = TermPoly(core.k)
    for w in rows:
        out.iadd(w.mul(w.conj(), core.budget))
    return out.scaled(core.noise_var)


def _eval_terms(core: ExpansionCore, poly: TermPoly, errors: np.ndarray) -> complex:
    errors = np.asarray(errors, dtype=float).reshape(core.k, 3)
    sin_shift = np.sin(np.array(core.doas) + errors[:, 0])
    gain_fac = 1.0 / (1.0 + errors[:, 1] / np.array(core.ranges))
    return poly.evaluate(core.c_unit, core.f_unit, sin_shift, errors[:, 2], gain_fac)


def nu_expansion(ctx: MomentContext, errors: np.ndarray) -> complex:
    """Evaluate the series-expanded decision variable at one error draw.

    Must match the explicit matrix product of truncated weights with the
    true channel; this is the structural cross-check of the expansion.
    """
    if ctx.beta is None:
        raise ValueError("context must carry a symbol combination beta")
    core = build_core(ctx)
    return _eval_terms(core, nu_poly(core, ctx.beta), errors)


def gamma_expansion(ctx: MomentContext, errors: np.ndarray) -> float:
    """Evaluate the series-expanded noise power at one error draw."""
    core = build_core(ctx)
    val = _eval_terms(core, gamma_poly(core), errors)
    return float(val.real)
