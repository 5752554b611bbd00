"""Linear equalizers built from an estimated channel, exact and truncated.

The truncated variants expand the Gram inverse as a geometric series around
the nominal diagonal C*I, where C = N for zero forcing and N + alpha for
MMSE (alpha = noise variance / symbol power).  That nominal diagonal equals
the true Gram diagonal only for unit-magnitude column gains, so callers
should feed gain-normalized channels; the exact variants are scale-agnostic.
A spectral-radius estimate of the off-diagonal contraction is attached to
truncated weights as a convergence-validity flag.

Weight matrices are K x N row-per-drone operators; applying one to a
received vector yields per-drone decision variables for MPSK detection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned

COND_LIMIT = 1e12

MRC = "mrc"
ZF = "zf"
MMSE = "mmse"


@dataclass(frozen=True)
class EqualizerWeights:
    """A K x N weight matrix tagged with its construction."""

    matrix: np.ndarray
    kind: str
    mode: str  # "exact" or "neumann"
    order: int | None = None
    regularizer: float = 0.0
    spectral_radius: float | None = None

    @property
    def neumann_valid(self) -> bool | None:
        """True when the series contraction estimate is below one."""
        if self.spectral_radius is None:
            return None
        return self.spectral_radius < 1.0


def _as_matrix(h_hat) -> np.ndarray:
    h = getattr(h_hat, "entries", h_hat)
    return np.asarray(h, dtype=complex)


def mrc_weights(h_hat) -> EqualizerWeights:
    """Maximum ratio combining: W is the conjugate transpose of the channel."""
    h = _as_matrix(h_hat)
    return EqualizerWeights(matrix=h.conj().T, kind=MRC, mode="exact")


def gram_exact_inverse(gram: np.ndarray) -> np.ndarray:
    """Inverse of a Hermitian positive-definite Gram matrix.

    Raises IllConditioned (with the 2-norm condition estimate) instead of
    returning garbage when the condition number crosses 1e12.
    """
    gram = np.asarray(gram, dtype=complex)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditioned(float(cond))
    return np.linalg.inv(gram)


def zf_weights_exact(h_hat) -> EqualizerWeights:
    """Zero forcing via the pseudoinverse: (H^H H)^-1 H^H."""
    h = _as_matrix(h_hat)
    gram = h.conj().T @ h
    w = gram_exact_inverse(gram) @ h.conj().T
    return EqualizerWeights(matrix=w, kind=ZF, mode="exact")


def mmse_weights_exact(h_hat, noise_var: float, symbol_power: float) -> EqualizerWeights:
    """MMSE weights (H^H H + (noise/symbol_power) I)^-1 H^H."""
    if symbol_power <= 0:
        raise ValueError("symbol_power must be positive")
    h = _as_matrix(h_hat)
    k = h.shape[1]
    alpha = noise_var / symbol_power
    gram = h.conj().T @ h + alpha * np.eye(k)
    w = np.linalg.solve(gram, h.conj().T)
    return EqualizerWeights(matrix=w, kind=MMSE, mode="exact", regularizer=alpha)


def _offdiag_spectral_radius(m: np.ndarray, iters: int = 30) -> float:
    """Power-iteration estimate of the spectral radius of m."""
    k = m.shape[0]
    if k == 1:
        return 0.0
    v = np.ones(k, dtype=complex) / np.sqrt(k)
    lam = 0.0
    for _ in range(iters):
        w = m @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0
        v = w / nrm
        lam = nrm
    return float(lam)


def neumann_gram_inverse(
    h_hat,
    kind: str,
    regularizer: float,
    order: int,
    true_diagonal: bool = False,
) -> tuple[np.ndarray, float]:
    """Truncated series for the Gram inverse around its diagonal part.

    Sums (-Gd^-1 Ge)^r Gd^-1 for r = 0..order, where Ge is the off-diagonal
    part of the Gram matrix and Gd is the nominal diagonal N*I (ZF) or
    (N + regularizer)*I (MMSE).  With ``true_diagonal`` the actual Gram
    diagonal is used instead, which is the better-converging split whenever
    column gains stray from unit magnitude.

    Returns the truncated inverse and the estimated spectral radius of
    Gd^-1 Ge; the series converges iff that radius is below one.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    h = _as_matrix(h_hat)
    n, k = h.shape
    gram = h.conj().T @ h
    if kind == MMSE:
        gram = gram + regularizer * np.eye(k)
    if true_diagonal:
        gd = np.diag(gram).real.copy()
    else:
        gd = np.full(k, float(n) + (regularizer if kind == MMSE else 0.0))
    # Ge is strictly off-diagonal in both splits; any mismatch between the
    # nominal Gd and the true diagonal is deliberately dropped.
    ge = gram.copy()
    np.fill_diagonal(ge, 0.0)
    contraction = ge / gd[:, None]
    rho = _offdiag_spectral_radius(contraction)

    gd_inv = np.diag(1.0 / gd)
    acc = gd_inv.copy()
    term = gd_inv.copy()
    for _ in range(order):
        term = -contraction @ term
        acc = acc + term
    return acc, rho


def _series_sum(m: np.ndarray, order: int) -> np.ndarray:
    """Horner evaluation of I + m + m^2 + ... + m^order."""
    k = m.shape[0]
    s = np.eye(k, dtype=complex)
    for _ in range(order):
        s = np.eye(k) + m @ s
    return s


def _neumann_weights(h: np.ndarray, kind: str, alpha: float, order: int,
                     true_diagonal: bool) -> EqualizerWeights:
    n, k = h.shape
    gram = h.conj().T @ h
    if kind == MMSE:
        gram = gram + alpha * np.eye(k)
    if true_diagonal:
        c = np.diag(gram).real
    else:
        c = np.full(k, float(n) + (alpha if kind == MMSE else 0.0))

    ge = gram.copy()
    np.fill_diagonal(ge, 0.0)
    rho = _offdiag_spectral_radius(ge / c[:, None])

    if order == 0:
        w = h.conj().T / c[:, None]
    else:
        m = np.eye(k) - gram / c[:, None]
        w = (_series_sum(m, order) @ h.conj().T) / c[:, None]
    return EqualizerWeights(
        matrix=w, kind=kind, mode="neumann", order=order,
        regularizer=alpha, spectral_radius=rho,
    )


def zf_weights_neumann(h_hat, order: int, true_diagonal: bool = False) -> EqualizerWeights:
    """Truncated-series zero forcing; order 0 is exactly H^H / N (scaled MRC)."""
    return _neumann_weights(_as_matrix(h_hat), ZF, 0.0, order, true_diagonal)


def mmse_weights_neumann(
    h_hat, noise_var: float, symbol_power: float, order: int,
    true_diagonal: bool = False,
) -> EqualizerWeights:
    """Truncated-series MMSE with nominal diagonal (N + noise/symbol_power)."""
    if symbol_power <= 0:
        raise ValueError("symbol_power must be positive")
    alpha = noise_var / symbol_power
    return _neumann_weights(_as_matrix(h_hat), MMSE, alpha, order, true_diagonal)


def neumann_weights_binomial(h_hat, kind: str, alpha: float, order: int) -> np.ndarray:
    """Binomial-collapsed form of the truncated weights (test oracle).

    Expanding the series termwise and summing the binomial coefficients
    column-wise gives sum_j (-1)^j C(order+1, j+1) G^j H^H / C^(j+1); this
    must match the Horner product form to floating precision.
    """
    from math import comb

    h = _as_matrix(h_hat)
    n, k = h.shape
    gram = h.conj().T @ h
    if kind == MMSE:
        gram = gram + alpha * np.eye(k)
    c = float(n) + (alpha if kind == MMSE else 0.0)
    acc = np.zeros((k, n), dtype=complex)
    gpow = np.eye(k, dtype=complex)
    for j in range(order + 1):
        acc += ((-1) ** j) * comb(order + 1, j + 1) * (gpow @ h.conj().T) / c ** (j + 1)
        gpow = gpow @ gram
    return acc


def equalize_apply(weights: EqualizerWeights, y: np.ndarray) -> np.ndarray:
    """Apply a weight matrix: x = W y (y may be a batch with shape (N, T))."""
    y = np.asarray(y)
    if y.shape[0] != weights.matrix.shape[1]:
        raise ValueError(
            f"received vector length {y.shape[0]} does not match "
            f"{weights.matrix.shape[1]} antennas"
        )
    return weights.matrix @ y


def detect_mpsk(x, order: int):
    """Nearest-phase MPSK decision, 1-based symbol indices.

    Ties on a decision boundary resolve toward the smaller index; a zero
    input decides symbol 1.  Accepts scalars or arrays.
    """
    x = np.asarray(x)
    if not np.all(np.isfinite(x)):
        raise ValueError("decision variable must be finite")
    d = np.angle(x) * order / (2.0 * np.pi)
    k_lo = np.floor(d)
    dist_lo = d - k_lo
    dist_hi = 1.0 - dist_lo
    m_lo = (k_lo.astype(int) % order) + 1
    m_hi = (k_lo.astype(int) + 1) % order + 1
    out = np.where(
        dist_lo < dist_hi, m_lo,
        np.where(dist_lo > dist_hi, m_hi, np.minimum(m_lo, m_hi)),
    )
    if out.ndim == 0:
        return int(out)
    return out
