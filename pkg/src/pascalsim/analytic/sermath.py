"""Conditional and average symbol error rate for series-built equalizers.

The conditional SER given one localization-error draw is the two-term
Gaussian-tail union bound on the MPSK decision wedge.  The average SER
closes the expectation over the Gaussian error model with a hybrid scheme:
the decision variable and its noise power are truncated-series lattice
polynomials, the Q functions are Taylor-expanded about the error-free
operating point, ratio expectations are split to first order, and every
remaining trigonometric moment evaluates in closed form through truncated
Gaussian characteristic values.  A sampled-error numerical average of the
same conditional bound serves as the validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product as _iter_product
from math import comb, factorial
from typing import NamedTuple

import numpy as np

from ..equalize import MMSE, MRC, EqualizerWeights
from ..errors import Undefined
from ..localization import sample_errors
from .context import MomentContext, gain_reference
from .expansion import (
    ExpansionCore,
    _eval_terms,
    build_core,
    gamma_poly,
    nu_poly,
)
from .lattice import MomentTables, moment_poly_from_terms
from .moments import phasor_values
from .special import q_derivative, q_function

_SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class ConditionalSerTerms:
    """Ingredients of the conditional union bound for one error draw.

    nu is the post-equalization signal term; gamma the equalized noise
    variance; d1/d2 the distances to the two decision boundaries of the
    transmitted symbol's wedge.
    """

    nu: complex
    gamma: float
    d1: float
    d2: float


def _decision_distances(nu_rel: complex, modulation: int) -> tuple[float, float]:
    amp = abs(nu_rel)
    arg = np.angle(nu_rel)
    d1 = np.sin(np.pi / modulation - arg) * amp
    d2 = np.sin(np.pi / modulation + arg) * amp
    return float(d1), float(d2)


def conditional_ser_terms(
    weights: EqualizerWeights,
    true_channel: np.ndarray,
    powers: np.ndarray,
    beta,
    modulation: int,
    noise_var: float,
    target: int,
) -> ConditionalSerTerms:
    """nu, Gamma and boundary distances for one symbol combination.

    The boundary distances are measured in the transmitted symbol's
    decision wedge, i.e. the argument of nu is referenced to the target
    drone's constellation phase.
    """
    w_row = weights.matrix[target]
    sym = np.exp(2j * np.pi * (np.asarray(beta) - 1) / modulation)
    base = (w_row @ true_channel) * np.sqrt(np.asarray(powers, dtype=float))
    nu = complex(np.sum(base * sym))
    if nu == 0:
        raise Undefined("post-equalization signal term vanished")
    gamma = noise_var * float(np.sum(np.abs(w_row) ** 2))
    if gamma <= 0:
        raise ValueError("noise term must be positive")
    nu_rel = nu * complex(np.conj(sym[target]))
    d1, d2 = _decision_distances(nu_rel, modulation)
    return ConditionalSerTerms(nu=nu, gamma=gamma, d1=d1, d2=d2)


def conditional_ser(
    weights: EqualizerWeights,
    true_channel: np.ndarray,
    powers: np.ndarray,
    beta,
    modulation: int,
    noise_var: float,
    target: int,
) -> float:
    """Union-bound SER for the target drone given exact localization errors.

    Q(sqrt(2) d1 / sqrt(Gamma)) + Q(sqrt(2) d2 / sqrt(Gamma)), clamped to
    [0, 1].  Raises Undefined when the signal term is exactly zero.
    """
    t = conditional_ser_terms(
        weights, true_channel, powers, beta, modulation, noise_var, target
    )
    root = np.sqrt(t.gamma)
    val = q_function(_SQRT2 * t.d1 / root) + q_function(_SQRT2 * t.d2 / root)
    return float(min(max(val, 0.0), 1.0))


# ---------------------------------------------------------------------------
# closed-form machinery


def _moment_tables(core: ExpansionCore, ctx: MomentContext) -> MomentTables:
    model = ctx.error_model
    sensitive = core.kind == MMSE

    def make_theta(p):
        sigma = float(model.sigma_theta[p])
        sin_t, cos_t = core.sines[p], np.cos(core.doas[p])
        cache: dict[tuple[int, int], np.ndarray] = {}

        def lookup(lo: int, hi: int) -> np.ndarray:
            key = (lo, hi)
            if key not in cache:
                iv = np.arange(lo, hi + 1)
                rot = np.exp(1j * core.c_unit * iv * sin_t)
                ph = phasor_values(core.c_unit * iv * cos_t, sigma, model.theta_bounds)
                cache[key] = rot * ph
            return cache[key]

        return lookup

    def make_dopp(p):
        sigma = float(model.sigma_doppler[p])
        bounds = (float(model.doppler_bounds[p, 0]), float(model.doppler_bounds[p, 1]))
        cache: dict[int, complex] = {}

        def lookup(dv: int) -> complex:
            if dv not in cache:
                if sigma == 0.0 or dv == 0:
                    cache[dv] = 1.0 + 0.0j
                else:
                    cache[dv] = complex(
                        phasor_values(np.array([core.f_unit * dv]), sigma, bounds)[0]
                    )
            return cache[dv]

        return lookup

    if sensitive:
        rho = 0.5 * (model.sigma_range / np.array(core.ranges)) ** 2
    else:
        # Zero-forcing and MRC decisions are invariant to per-column gain
        # scalings, so the closed form pins the estimated gains at their
        # true-range values; only MMSE keeps the range perturbation.
        rho = np.zeros(core.k)
    return MomentTables(
        theta=[make_theta(p) for p in range(core.k)],
        dopp=[make_dopp(p) for p in range(core.k)],
        rho=np.asarray(rho, dtype=float),
    )


class _NuMomentEngine:
    """Moments of powers of the decision variable for one symbol combo."""

    def __init__(self, core: ExpansionCore, tables: MomentTables, beta,
                 max_total: int):
        self.core = core
        self.tables = tables
        sensitive = core.kind == MMSE
        tp = nu_poly(core, tuple(beta))
        self.amp_scale = float(sum(abs(a) for a in tp.terms.values()))
        self.nu0 = _eval_terms(core, tp, np.zeros((core.k, 3)))
        self._mz: dict[tuple[int, int], complex] = {}
        self._fill(moment_poly_from_terms(tp, sensitive), max_total)

    def _fill(self, zeta, max_total: int) -> None:
        """Tabulate E[zeta^m conj(zeta)^n] for all m >= n, m + n <= max."""
        budget = self.core.budget
        zeta_conj = zeta.conj()
        self._mz[(0, 0)] = 1.0 + 0.0j
        diag = None
        for n in range(max_total // 2 + 1):
            if n == 0:
                cur = None
            else:
                step = zeta.mul(zeta_conj, budget)
                diag = step if diag is None else diag.mul(step, budget)
                cur = diag
                self._mz[(n, n)] = cur.apply(self.tables)
            m = n
            while m + n < max_total:
                m += 1
                cur = zeta if cur is None else cur.mul(zeta, budget)
                self._mz[(m, n)] = cur.apply(self.tables)

    def mz(self, m: int, n: int) -> complex:
        if n > m:
            return complex(np.conj(self._mz[(n, m)]))
        return self._mz[(m, n)]

    def nu_mixed_moment(self, k1: int, k2: int) -> float:
        """E[nu_y^k2 nu_x^(k1-k2)] from the exponential-sum binomials."""
        a, b = k2, k1 - k2
        total = 0.0 + 0.0j
        for u in range(a + 1):
            for v in range(b + 1):
                total += (
                    comb(a, u) * comb(b, v) * (-1.0) ** (a - u)
                    * self.mz(u + v, a + b - u - v)
                )
        total /= 2.0 ** (a + b) * (1j) ** a
        return float(total.real)


def moment_nu_power(ctx: MomentContext, k1: int, k2: int, which: str = "E7") -> float:
    """Closed-form mixed moments of the decision variable's quadratures.

    which='E7' returns E[nu_y^k2 nu_x^(k1-k2)]; which='E8' returns
    E[nu_y^k1].  The decision variable is referenced to the target symbol's
    phase, matching the conditional-bound convention.  The context must
    carry a symbol combination.
    """
    if ctx.beta is None:
        raise ValueError("context must carry a symbol combination beta")
    if not 0 <= k2 <= k1:
        raise ValueError("need 0 <= k2 <= k1")
    if k1 > ctx.approx.taylor_order:
        raise ValueError("k1 exceeds the configured Taylor order")
    core = build_core(ctx)
    eng = _NuMomentEngine(core, _moment_tables(core, ctx), ctx.beta, k1)
    if which == "E7":
        return eng.nu_mixed_moment(k1, k2)
    if which == "E8":
        return eng.nu_mixed_moment(k1, k1)
    raise ValueError("which must be 'E7' or 'E8'")


def gamma_moments(ctx: MomentContext) -> tuple[float, float]:
    """Closed-form (E[Gamma], E[Gamma^2]) of the equalized noise power."""
    core = build_core(ctx)
    tables = _moment_tables(core, ctx)
    tp = gamma_poly(core)
    mp = moment_poly_from_terms(tp, core.kind == MMSE)
    e_g = mp.apply(tables).real
    e_g2 = mp.mul(mp, core.budget).apply(tables).real
    return float(e_g), float(e_g2)


def _sqrt_gamma_powers(e_g: float, var_g: float, max_k: int) -> np.ndarray:
    """E[Gamma^(k/2)] via the quadratic correction to the square root:
    E[Gamma]^(k/2) + k (k-2) E[Gamma]^(k/2-2) Var(Gamma) / 8."""
    out = np.empty(max_k + 1)
    for k1 in range(max_k + 1):
        lead = e_g ** (k1 / 2.0)
        if k1 in (0, 2):
            out[k1] = lead
        else:
            out[k1] = lead + k1 * (k1 - 2) * e_g ** (k1 / 2.0 - 2.0) * var_g / 8.0
    return out


def _relative_combos(modulation: int, k: int, target: int):
    """Symbol combinations with the target fixed at symbol 1.

    Rotating every drone's symbol by a common constellation step leaves the
    union-bound geometry unchanged, so the M^K average collapses to the
    M^(K-1) combinations relative to the target symbol.
    """
    others = [p for p in range(k) if p != target]
    for combo in _iter_product(range(1, modulation + 1), repeat=len(others)):
        beta = [1] * k
        for p, m in zip(others, combo):
            beta[p] = m
        yield tuple(beta)


def average_ser(ctx: MomentContext) -> float:
    """Hybrid closed-form approximation of the error-model-averaged SER.

    Per symbol combination: Taylor-expand both Q terms about the error-free
    operating point, reduce the polynomial expectations to mixed quadrature
    moments divided by first-order-split noise-power moments, and average
    over the relative combinations.  Result clamped to [0, 1].

    Raises Undefined when the error-free decision variable vanishes and
    BudgetExceeded when the lattice sums outgrow the configured budget.
    """
    core = build_core(ctx)
    tables = _moment_tables(core, ctx)
    m = ctx.modulation
    r_taylor = ctx.approx.taylor_order

    g_tp = gamma_poly(core)
    gamma0 = _eval_terms(core, g_tp, np.zeros((core.k, 3))).real
    g_mp = moment_poly_from_terms(g_tp, core.kind == MMSE)
    e_g = g_mp.apply(tables).real
    e_g2 = g_mp.mul(g_mp, core.budget).apply(tables).real
    var_g = max(e_g2 - e_g * e_g, 0.0)
    sqrt_g = _sqrt_gamma_powers(e_g, var_g, r_taylor)
    root_g0 = np.sqrt(gamma0)

    sin_m, cos_m = np.sin(np.pi / m), np.cos(np.pi / m)
    total = 0.0
    combos = list(_relative_combos(m, core.k, core.target))
    for beta in combos:
        eng = _NuMomentEngine(core, tables, beta, r_taylor)
        nu0 = eng.nu0
        if abs(nu0) <= 1e-14 * max(eng.amp_scale, 1e-300):
            raise Undefined("error-free decision variable vanished")
        nux0, nuy0 = nu0.real, nu0.imag
        zero_x_branch = abs(nux0) <= 1e-12 * abs(nu0)

        combo_val = 0.0
        for ell in (1, 2):
            sgn = (-1.0) ** ell
            if not zero_x_branch:
                nu_tilde0 = sin_m * nux0 + sgn * cos_m * nuy0
                x0 = _SQRT2 * nu_tilde0 / root_g0
                e_nu = np.empty(r_taylor + 1)
                for k1 in range(r_taylor + 1):
                    acc = 0.0
                    for k2 in range(k1 + 1):
                        acc += (
                            comb(k1, k2)
                            * sin_m ** (k1 - k2)
                            * (sgn * cos_m) ** k2
                            * eng.nu_mixed_moment(k1, k2)
                        )
                    e_nu[k1] = acc
                c_shift = -nu_tilde0 / root_g0
                c1_factor = 1.0
            else:
                c1 = sgn * cos_m
                x0 = _SQRT2 * c1 * nuy0 / root_g0
                e_nu = np.array(
                    [eng.nu_mixed_moment(k1, k1) for k1 in range(r_taylor + 1)]
                )
                c_shift = -nuy0 / root_g0
                c1_factor = c1

            e5 = e_nu / sqrt_g
            e_ell = 0.0
            for r in range(r_taylor + 1):
                e3 = 0.0
                for k1 in range(r + 1):
                    e3 += comb(r, k1) * e5[k1] * c_shift ** (r - k1)
                qr = q_function(x0) if r == 0 else q_derivative(r, x0)
                e_ell += (_SQRT2 * c1_factor) ** r * qr * e3 / factorial(r)
            combo_val += e_ell
        total += combo_val

    avg = total / len(combos)
    return float(min(max(avg, 0.0), 1.0))


class SemiAnalyticSer(NamedTuple):
    ser: float
    ci95_halfwidth: float
    n_draws: int


def average_ser_semianalytic(
    ctx: MomentContext,
    n_draws: int,
    rng: np.random.Generator,
    mode: str = "neumann",
) -> SemiAnalyticSer:
    """Numerical average of the conditional union bound over sampled errors.

    Ground truth for the closed-form path: draws localization errors from
    the context's model, rebuilds the estimated channel, forms the weights
    (series-truncated by default, ``mode='exact'`` for the exact matrices)
    and averages the conditional SER over the relative symbol combinations.
    """
    if n_draws < 1000:
        raise ValueError("n_draws must be >= 1000 for a meaningful interval")
    core = build_core(ctx)
    cfg = ctx.cfg
    n = core.n
    gref = gain_reference(ctx.drones, cfg)
    doas = np.array([d.doa for d in ctx.drones])
    ranges = np.array([d.range_m for d in ctx.drones])
    dopplers = np.array([d.doppler for d in ctx.drones])
    powers = np.array([d.power for d in ctx.drones])

    n0 = np.arange(n)[:, None]
    h_true = np.exp(
        -2j * np.pi * n0 * cfg.element_spacing * np.sin(doas)[None, :] / cfg.wavelength
    ) * (np.array(core.gains) * np.exp(1j * core.f_unit * dopplers))[None, :]

    draws = np.stack([sample_errors(ctx.error_model, rng) for _ in range(n_draws)])
    doa_hat = doas[None, :] + draws[:, :, 0]
    rng_hat = ranges[None, :] + draws[:, :, 1]
    dop_hat = dopplers[None, :] + draws[:, :, 2]

    steer = np.exp(
        -2j * np.pi * n0[None, :, :] * cfg.element_spacing
        * np.sin(doa_hat)[:, None, :] / cfg.wavelength
    )
    gains_hat = cfg.wavelength / (4.0 * np.pi * rng_hat) / gref
    h_hat = steer * (gains_hat * np.exp(1j * core.f_unit * dop_hat))[:, None, :]

    w_rows = _batched_weight_rows(h_hat, core, mode)

    base = np.einsum("dn,nk->dk", w_rows, h_true) * np.sqrt(powers)[None, :]
    gamma = core.noise_var * np.sum(np.abs(w_rows) ** 2, axis=1)

    m = ctx.modulation
    combos = np.array(list(_relative_combos(m, core.k, core.target)))
    sym = np.exp(2j * np.pi * (combos - 1) / m)  # (n_combos, K)
    nu = base @ sym.T  # (n_draws, n_combos)
    amp = np.abs(nu)
    arg = np.angle(nu)
    root = np.sqrt(gamma)[:, None]
    d1 = np.sin(np.pi / m - arg) * amp
    d2 = np.sin(np.pi / m + arg) * amp
    per = q_function(_SQRT2 * d1 / root) + q_function(_SQRT2 * d2 / root)
    per = np.clip(per, 0.0, 1.0).mean(axis=1)

    mean = float(per.mean())
    ci = float(1.96 * per.std(ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else 0.0
    return SemiAnalyticSer(ser=mean, ci95_halfwidth=ci, n_draws=n_draws)


def _batched_weight_rows(h_hat: np.ndarray, core: ExpansionCore, mode: str) -> np.ndarray:
    """Target-drone weight rows for a batch of estimated channels."""
    k = core.k
    ident = np.eye(k)
    h_herm = np.conj(np.transpose(h_hat, (0, 2, 1)))
    if mode == "exact":
        if core.kind == MRC:
            return h_herm[:, core.target, :]
        gram = np.einsum("dnk,dnl->dkl", h_hat.conj(), h_hat)
        if core.alpha > 0:
            gram = gram + core.alpha * ident[None, :, :]
        w = np.linalg.solve(gram, h_herm)
        return w[:, core.target, :]
    if mode != "neumann":
        raise ValueError("mode must be 'neumann' or 'exact'")
    c = core.c_diag
    if core.order == 0:
        return h_herm[:, core.target, :] / c
    gram = np.einsum("dnk,dnl->dkl", h_hat.conj(), h_hat)
    if core.alpha > 0:
        gram = gram + core.alpha * ident[None, :, :]
    m_mat = ident[None, :, :] - gram / c
    s = np.broadcast_to(ident, gram.shape).copy()
    for _ in range(core.order):
        s = ident[None, :, :] + m_mat @ s
    w = (s @ h_herm) / c
    return w[:, core.target, :]
