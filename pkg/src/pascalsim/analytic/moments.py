"""Closed-form trigonometric moments of truncated Gaussian variables.

Everything reduces to the characteristic value E[exp(j c X)] of a zero-mean
truncated Gaussian, which completes the square into a complex-argument erf
difference.  Moments of cos/sin of affine forms in several independent
variables are products of per-variable characteristic values combined by
Euler's formula.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf as _erf_real

from .special import erf_complex

_SQRT2 = np.sqrt(2.0)


def phasor_values(coeffs, sigma: float, bounds, renormalize: bool = True) -> np.ndarray:
    """Vectorized E[exp(j c X)] over an array of coefficients c."""
    lo, hi = float(bounds[0]), float(bounds[1])
    if lo >= hi:
        raise ValueError("bounds must satisfy lo < hi")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if sigma == 0.0:
        return np.ones(coeffs.shape, dtype=complex)
    shift = 1j * coeffs * sigma * sigma
    u_hi = (hi - shift) / (_SQRT2 * sigma)
    u_lo = (lo - shift) / (_SQRT2 * sigma)
    val = 0.5 * np.exp(-0.5 * coeffs * coeffs * sigma * sigma) * (
        erf_complex(u_hi) - erf_complex(u_lo)
    )
    if renormalize:
        mass = 0.5 * (_erf_real(hi / (_SQRT2 * sigma)) - _erf_real(lo / (_SQRT2 * sigma)))
        if mass <= 0.0:
            raise ValueError("truncation bounds carry no probability mass")
        val = val / mass
    return val


def truncated_gaussian_phasor(
    coeff: float,
    sigma: float,
    bounds: tuple[float, float],
    renormalize: bool = True,
) -> complex:
    """E[exp(j coeff X)] for X ~ N(0, sigma^2) truncated to bounds.

    The unnormalized integral is sqrt(2 pi sigma^2) exp(-coeff^2 sigma^2/2)
    [erf(u_hi) - erf(u_lo)] / 2 with u = (b - j coeff sigma^2)/(sqrt(2) sigma);
    dividing by the truncated mass makes it a proper expectation.  With
    sigma = 0 the variable is degenerate and the phasor is 1.
    """
    return complex(phasor_values(np.array([coeff]), sigma, bounds, renormalize)[0])


def gaussian_trig_moment(
    coeff: float,
    offset: float,
    sigma: float,
    bounds: tuple[float, float],
    parity: str,
) -> float:
    """E[cos(offset + coeff X)] or E[sin(...)] for truncated Gaussian X.

    parity selects 'cos' or 'sin'.  coeff = 0 or sigma = 0 degenerate to the
    deterministic f(offset).
    """
    val = np.exp(1j * offset) * truncated_gaussian_phasor(coeff, sigma, bounds)
    if parity == "cos":
        return float(val.real)
    if parity == "sin":
        return float(val.imag)
    raise ValueError(f"parity must be 'cos' or 'sin', got {parity!r}")


def trig_moment_linear(
    const: float,
    coeffs,
    sigmas,
    bounds,
    parity: str,
) -> float:
    """E[f(const + sum_i coeffs[i] X_i)] for independent truncated Gaussians.

    The X_i are zero-mean with the given sigmas and per-variable truncation
    bounds (sequence of (lo, hi) pairs).
    """
    acc = np.exp(1j * const)
    for c, s, b in zip(coeffs, sigmas, bounds, strict=True):
        acc *= truncated_gaussian_phasor(float(c), float(s), (float(b[0]), float(b[1])))
    if parity == "cos":
        return float(acc.real)
    if parity == "sin":
        return float(acc.imag)
    raise ValueError(f"parity must be 'cos' or 'sin', got {parity!r}")


def trig_moment_triple(
    c1: float,
    c2: float,
    c3: float,
    c4: float,
    sigmas,
    bounds,
    parity: str,
) -> float:
    """Three-variable moment E[f(c1 + c2 X1 + c3 X2 + c4 X3)].

    X1 is the target drone's Doppler error, X2 its angle error, X3 another
    drone's angle error; sigmas/bounds follow that order.  Factorizes into
    three closed-form one-dimensional integrals by independence.
    """
    return trig_moment_linear(c1, (c2, c3, c4), sigmas, bounds, parity)


def inv_gain_moment(power: int, rel_sigma: float) -> float:
    """E[(1 + X)^-power] for small X ~ N(0, rel_sigma^2), second order.

    Used for the gain perturbation eta(d + dd)/eta(d) = 1/(1 + dd/d); the
    quadratic term of the Taylor expansion gives
    1 + power (power+1) rel_sigma^2 / 2, accurate to O(rel_sigma^4).
    """
    if power < 0:
        raise ValueError("power must be >= 0")
    return 1.0 + 0.5 * power * (power + 1) * rel_sigma * rel_sigma
