"""Special functions for the SER analysis: Gaussian tail, Hermite
polynomials, Q-function derivatives, and the error function continued to
complex arguments.

erf_complex uses the Maclaurin series near the origin and a Weideman-style
rational approximation of the scaled complementary error function elsewhere;
the rational form stays accurate all the way to the imaginary axis, where a
Laplace continued fraction would degrade.  Inputs are guarded to
|Im z| <= 12 so exp(-z^2) cannot overflow.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erfc as _erfc_real

IM_GUARD = 12.0
_SERIES_RADIUS = 2.0
_SQRT_PI = np.sqrt(np.pi)


def q_function(x):
    """Gaussian tail probability Q(x) = erfc(x / sqrt(2)) / 2."""
    return 0.5 * _erfc_real(np.asarray(x, dtype=float) / np.sqrt(2.0))


def hermite_poly(n: int, x):
    """Physicists' Hermite polynomial H_n(x) by the three-term recurrence."""
    if n < 0 or n > 32:
        raise ValueError("Hermite order must be in 0..32")
    x = np.asarray(x, dtype=float)
    h_prev = np.ones_like(x)
    if n == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = 2.0 * x
    for m in range(1, n):
        h, h_prev = 2.0 * x * h - 2.0 * m * h_prev, h
    return h if h.ndim else float(h)


def q_derivative(r: int, x0: float) -> float:
    """r-th derivative of the Q function at x0, r >= 1.

    Q'(x) = -exp(-x^2/2)/sqrt(2 pi); higher orders follow from the Hermite
    recursion applied to the Gaussian kernel.
    """
    if r < 1:
        raise ValueError("derivative order must be >= 1")
    lead = -1.0 / (np.sqrt(2.0) ** r * _SQRT_PI)
    return float(
        lead * np.exp(-0.5 * x0 * x0) * (-1.0) ** (r + 1)
        * hermite_poly(r - 1, x0 / np.sqrt(2.0))
    )


def _weideman_coefficients(n_terms: int = 36):
    """Polynomial coefficients of Weideman's rational Faddeeva approximation."""
    m = 2 * n_terms
    idx = np.arange(-m + 1, m)
    scale = np.sqrt(n_terms / np.sqrt(2.0))
    theta = np.pi * idx / m
    t = scale * np.tan(0.5 * theta)
    fn = np.zeros(len(idx) + 1)
    fn[1:] = np.exp(-t * t) * (scale * scale + t * t)
    coefs = np.fft.fft(np.fft.fftshift(fn)).real / (2.0 * m)
    return scale, np.flipud(coefs[1 : n_terms + 1])


_W_SCALE, _W_COEFS = _weideman_coefficients()


def _faddeeva_upper(z: np.ndarray) -> np.ndarray:
    """w(z) = exp(-z^2) erfc(-j z) for Im z >= 0."""
    iz = 1j * z
    ratio = (_W_SCALE + iz) / (_W_SCALE - iz)
    poly = np.polyval(_W_COEFS, ratio)
    return 2.0 * poly / (_W_SCALE - iz) ** 2 + (1.0 / _SQRT_PI) / (_W_SCALE - iz)


def _erf_series(z: np.ndarray) -> np.ndarray:
    """Maclaurin series, adequate for |z| <= 2."""
    acc = np.zeros_like(z)
    term = z.copy()
    n = 0
    while True:
        acc = acc + term / (2 * n + 1)
        n += 1
        term = term * (-(z * z)) / n
        if np.all(np.abs(term) <= 1e-18 * np.maximum(np.abs(acc), 1e-30)) or n > 120:
            break
    return 2.0 / _SQRT_PI * acc


def erf_complex(z):
    """Error function continued to complex z, |Im z| <= 12.

    Matches the real erf on the real axis and satisfies the reflection
    symmetries erf(-z) = -erf(z) and erf(conj z) = conj(erf z) exactly by
    quadrant reduction.
    """
    z_arr = np.asarray(z, dtype=complex)
    scalar = z_arr.ndim == 0
    z_arr = np.atleast_1d(z_arr)
    if np.any(np.abs(z_arr.imag) > IM_GUARD):
        raise ValueError(f"|Im z| must be <= {IM_GUARD}")

    # Reduce to the first quadrant so every branch sees Re >= 0, Im >= 0.
    sign_re = np.where(z_arr.real < 0.0, -1.0, 1.0)
    sign_im = np.where(z_arr.imag < 0.0, -1.0, 1.0)
    zq = z_arr.real * sign_re + 1j * (z_arr.imag * sign_im)

    out = np.empty_like(zq)
    small = np.abs(zq) <= _SERIES_RADIUS
    if np.any(small):
        out[small] = _erf_series(zq[small])
    big = ~small
    if np.any(big):
        zb = zq[big]
        # erfc(z) = exp(-z^2) w(jz); jz lies in the upper half-plane here.
        out[big] = 1.0 - np.exp(-zb * zb) * _faddeeva_upper(1j * zb)

    # Undo the quadrant reduction: erf(-u) = -erf(u), erf(conj u) = conj erf(u).
    res = sign_re * out.real + 1j * (sign_im * out.imag)
    if scalar:
        return complex(res[0])
    return res
