"""Exponential-sum algebra on an integer phase lattice.

Every quantity the truncated-series analysis manipulates (Gram entries,
weight rows, the decision variable and its noise power) is a finite sum of
terms

    amp * exp(j * [c_unit * sum_p iv_p sin(theta_p + dth_p)
                   + f_unit * sum_p dv_p df_p])
        * prod_p (1 + dd_p / d_p)^(-ev_p)

with integer exponent vectors iv (steering), dv (Doppler) and ev (gain).
Products of such sums add exponent vectors and multiply amplitudes, which is
exactly the product-to-sum reduction of trigonometric products: expanding a
power of a term sum enumerates the same sign-resolved angle combinations,
just with repeated combinations merged on the lattice instead of being
enumerated one sign tuple at a time.

Two representations are used:

* ``TermPoly`` keeps full (iv, dv, ev) keys and supports exact pointwise
  evaluation at a given error draw.
* Moment polynomials drop ev from the key and instead carry the amplitude-
  weighted moments (sum amp, sum amp*ev_p, sum amp*ev_p^2) per drone, which
  is all the first-order gain-perturbation expectation needs.  They come in
  a dense K-dimensional array flavor (fast FFT convolution products, used
  for K <= 2) and a sparse flavor for more drones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import BudgetExceeded

DENSE_MAX_DRONES = 2


class TermPoly:
    """Sparse sum of lattice terms with exact (iv, dv, ev) keys."""

    __slots__ = ("k", "terms")

    def __init__(self, k: int, terms: dict | None = None):
        self.k = k
        self.terms = terms if terms is not None else {}

    @classmethod
    def const(cls, k: int, amp: complex) -> "TermPoly":
        zero = (0,) * k
        return cls(k, {(zero, zero, zero): complex(amp)})

    def copy(self) -> "TermPoly":
        return TermPoly(self.k, dict(self.terms))

    def add_term(self, iv, dv, ev, amp: complex) -> None:
        key = (tuple(iv), tuple(dv), tuple(ev))
        self.terms[key] = self.terms.get(key, 0.0 + 0.0j) + amp

    def __len__(self) -> int:
        return len(self.terms)

    def iadd(self, other: "TermPoly", scale: complex = 1.0) -> "TermPoly":
        for key, amp in other.terms.items():
            self.terms[key] = self.terms.get(key, 0.0 + 0.0j) + scale * amp
        return self

    def scaled(self, factor: complex) -> "TermPoly":
        return TermPoly(self.k, {key: factor * amp for key, amp in self.terms.items()})

    def mul(self, other: "TermPoly", budget: int | None = None) -> "TermPoly":
        if budget is not None and len(self) * len(other) > budget:
            raise BudgetExceeded(len(self) * len(other), budget)
        out: dict = {}
        for (iv1, dv1, ev1), a1 in self.terms.items():
            for (iv2, dv2, ev2), a2 in other.terms.items():
                key = (
                    tuple(x + y for x, y in zip(iv1, iv2)),
                    tuple(x + y for x, y in zip(dv1, dv2)),
                    tuple(x + y for x, y in zip(ev1, ev2)),
                )
                out[key] = out.get(key, 0.0 + 0.0j) + a1 * a2
        return TermPoly(self.k, out)

    def conj(self) -> "TermPoly":
        out = {}
        for (iv, dv, ev), amp in self.terms.items():
            key = (tuple(-x for x in iv), tuple(-x for x in dv), ev)
            out[key] = np.conj(amp)
        return TermPoly(self.k, out)

    def evaluate(
        self,
        c_unit: float,
        f_unit: float,
        sin_shift: np.ndarray,
        df: np.ndarray,
        gain_fac: np.ndarray,
    ) -> complex:
        """Exact value for one error draw.

        sin_shift[p] = sin(theta_p + dtheta_p), df[p] the Doppler errors,
        gain_fac[p] = (1 + dd_p/d_p)^-1 the per-drone gain perturbation.
        """
        total = 0.0 + 0.0j
        log_gain = np.log(gain_fac)
        for (iv, dv, ev), amp in self.terms.items():
            phase = c_unit * float(np.dot(iv, sin_shift)) + f_unit * float(np.dot(dv, df))
            gain = float(np.exp(np.dot(ev, log_gain)))
            total += amp * gain * np.exp(1j * phase)
        return total


@dataclass
class MomentTables:
    """Per-drone characteristic-value lookups for the moment functional.

    theta[p] maps an integer steering exponent to
    exp(j c_unit iv sin(theta_p)) * E[exp(j c_unit iv cos(theta_p) dth_p)];
    dopp[p] maps an integer Doppler exponent to its characteristic value;
    rho[p] = (sigma_d_p / d_p)^2 / 2 weights the gain-moment channels.
    """

    theta: list
    dopp: list
    rho: np.ndarray

    def theta_lookup(self, p: int, lo: int, hi: int) -> np.ndarray:
        return self.theta[p](lo, hi)

    def dopp_value(self, p: int, dv: int) -> complex:
        return self.dopp[p](dv)


def _channels(k: int, sensitive: bool) -> int:
    return 1 + 2 * k if sensitive else 1


class DensePoly:
    """Dense K-dimensional lattice array with gain-moment channels."""

    __slots__ = ("k", "nch", "lo", "dv", "arr")

    def __init__(self, k, nch, lo, dv, arr):
        self.k = k
        self.nch = nch
        self.lo = np.asarray(lo, dtype=np.int64)
        self.dv = np.asarray(dv, dtype=np.int64)
        self.arr = arr  # shape dims + (nch,)

    @property
    def cells(self) -> int:
        return int(np.prod(self.arr.shape[: self.k]))

    @classmethod
    def identity(cls, k: int, nch: int) -> "DensePoly":
        arr = np.zeros((1,) * k + (nch,), dtype=complex)
        arr[(0,) * k + (0,)] = 1.0
        return cls(k, nch, np.zeros(k, dtype=np.int64), np.zeros(k, dtype=np.int64), arr)

    @classmethod
    def from_termpoly(cls, tp: TermPoly, sensitive: bool) -> "DensePoly":
        k = tp.k
        nch = _channels(k, sensitive)
        keys = list(tp.terms.keys())
        iv = np.array([key[0] for key in keys], dtype=np.int64).reshape(len(keys), k)
        dv = np.array([key[1] for key in keys], dtype=np.int64).reshape(len(keys), k)
        ev = np.array([key[2] for key in keys], dtype=np.int64).reshape(len(keys), k)
        amps = np.array([tp.terms[key] for key in keys], dtype=complex)
        dv0 = dv[0]
        if not np.all(dv == dv0[None, :]):
            raise ValueError("moment polynomials require a uniform Doppler exponent")
        lo = iv.min(axis=0)
        dims = tuple(iv.max(axis=0) - lo + 1)
        arr = np.zeros(dims + (nch,), dtype=complex)
        idx = tuple((iv - lo[None, :]).T)
        np.add.at(arr, idx + (0,), amps)
        if sensitive:
            for p in range(k):
                np.add.at(arr, idx + (1 + 2 * p,), amps * ev[:, p])
                np.add.at(arr, idx + (2 + 2 * p,), amps * ev[:, p] ** 2)
        return cls(k, nch, lo, dv0.copy(), arr)

    def conj(self) -> "DensePoly":
        arr = np.conj(self.arr)
        arr = np.flip(arr, axis=tuple(range(self.k)))
        dims = np.array(self.arr.shape[: self.k], dtype=np.int64)
        lo = -(self.lo + dims - 1)
        return DensePoly(self.k, self.nch, lo, -self.dv, arr)

    def mul(self, other: "DensePoly", budget: int | None = None) -> "DensePoly":
        if self.nch != other.nch:
            raise ValueError("channel mismatch")
        k, nch = self.k, self.nch
        da = np.array(self.arr.shape[:k], dtype=np.int64)
        db = np.array(other.arr.shape[:k], dtype=np.int64)
        dims = tuple(int(x) for x in (da + db - 1))
        if budget is not None and int(np.prod(dims)) > budget:
            raise BudgetExceeded(int(np.prod(dims)), budget)
        axes = tuple(range(k))
        fa = np.fft.fftn(self.arr, s=dims, axes=axes)
        fb = np.fft.fftn(other.arr, s=dims, axes=axes)
        out = np.empty(dims + (nch,), dtype=complex)
        out_f = np.empty(dims + (nch,), dtype=complex)
        out_f[..., 0] = fa[..., 0] * fb[..., 0]
        if nch > 1:
            for p in range(k):
                e, e2 = 1 + 2 * p, 2 + 2 * p
                out_f[..., e] = fa[..., e] * fb[..., 0] + fa[..., 0] * fb[..., e]
                out_f[..., e2] = (
                    fa[..., e2] * fb[..., 0]
                    + 2.0 * fa[..., e] * fb[..., e]
                    + fa[..., 0] * fb[..., e2]
                )
        out = np.fft.ifftn(out_f, axes=axes)
        return DensePoly(k, nch, self.lo + other.lo, self.dv + other.dv, out)

    def apply(self, tables: MomentTables) -> complex:
        k = self.k
        combined = self.arr[..., 0].copy()
        if self.nch > 1:
            for p in range(k):
                rho = tables.rho[p]
                if rho != 0.0:
                    combined += rho * (self.arr[..., 2 + 2 * p] + self.arr[..., 1 + 2 * p])
        val = combined
        for p in range(k):
            hi = int(self.lo[p]) + self.arr.shape[p] - 1
            tab = tables.theta_lookup(p, int(self.lo[p]), hi)
            val = np.tensordot(tab, val, axes=([0], [0]))
        scale = 1.0 + 0.0j
        for p in range(k):
            scale *= tables.dopp_value(p, int(self.dv[p]))
        return complex(val * scale)


class SparsePoly:
    """Sparse lattice polynomial for K > 2, vectorized merge on int codes."""

    __slots__ = ("k", "nch", "iv", "vals", "dv")

    def __init__(self, k, nch, iv, vals, dv):
        self.k = k
        self.nch = nch
        self.iv = iv  # (n, k) int64
        self.vals = vals  # (n, nch) complex
        self.dv = np.asarray(dv, dtype=np.int64)

    @property
    def cells(self) -> int:
        return self.iv.shape[0]

    @classmethod
    def identity(cls, k: int, nch: int) -> "SparsePoly":
        vals = np.zeros((1, nch), dtype=complex)
        vals[0, 0] = 1.0
        return cls(k, nch, np.zeros((1, k), dtype=np.int64), vals,
                   np.zeros(k, dtype=np.int64))

    @classmethod
    def from_termpoly(cls, tp: TermPoly, sensitive: bool) -> "SparsePoly":
        k = tp.k
        nch = _channels(k, sensitive)
        keys = list(tp.terms.keys())
        iv = np.array([key[0] for key in keys], dtype=np.int64).reshape(len(keys), k)
        dv = np.array([key[1] for key in keys], dtype=np.int64).reshape(len(keys), k)
        ev = np.array([key[2] for key in keys], dtype=np.int64).reshape(len(keys), k)
        amps = np.array([tp.terms[key] for key in keys], dtype=complex)
        dv0 = dv[0]
        if not np.all(dv == dv0[None, :]):
            raise ValueError("moment polynomials require a uniform Doppler exponent")
        vals = np.zeros((len(keys), nch), dtype=complex)
        vals[:, 0] = amps
        if sensitive:
            for p in range(k):
                vals[:, 1 + 2 * p] = amps * ev[:, p]
                vals[:, 2 + 2 * p] = amps * ev[:, p] ** 2
        poly = cls(k, nch, iv, vals, dv0.copy())
        return poly._merged()

    def _merged(self) -> "SparsePoly":
        lo = self.iv.min(axis=0)
        span = self.iv.max(axis=0) - lo + 1
        strides = np.ones(self.k, dtype=np.int64)
        for p in range(self.k - 2, -1, -1):
            strides[p] = strides[p + 1] * span[p + 1]
        codes = (self.iv - lo[None, :]) @ strides
        uniq, inv = np.unique(codes, return_inverse=True)
        vals = np.zeros((len(uniq), self.nch), dtype=complex)
        np.add.at(vals, inv, self.vals)
        iv = np.empty((len(uniq), self.k), dtype=np.int64)
        rem = uniq.copy()
        for p in range(self.k):
            iv[:, p] = rem // strides[p] + lo[p]
            rem = rem % strides[p]
        return SparsePoly(self.k, self.nch, iv, vals, self.dv)

    def conj(self) -> "SparsePoly":
        return SparsePoly(self.k, self.nch, -self.iv, np.conj(self.vals), -self.dv)

    def mul(self, other: "SparsePoly", budget: int | None = None) -> "SparsePoly":
        if self.nch != other.nch:
            raise ValueError("channel mismatch")
        na, nb = self.cells, other.cells
        if budget is not None and na * nb > budget:
            raise BudgetExceeded(na * nb, budget)
        k, nch = self.k, self.nch
        iv = (self.iv[:, None, :] + other.iv[None, :, :]).reshape(na * nb, k)
        va = self.vals[:, None, :]
        vb = other.vals[None, :, :]
        vals = np.zeros((na, nb, nch), dtype=complex)
        vals[..., 0] = va[..., 0] * vb[..., 0]
        if nch > 1:
            for p in range(k):
                e, e2 = 1 + 2 * p, 2 + 2 * p
                vals[..., e] = va[..., e] * vb[..., 0] + va[..., 0] * vb[..., e]
                vals[..., e2] = (
                    va[..., e2] * vb[..., 0]
                    + 2.0 * va[..., e] * vb[..., e]
                    + va[..., 0] * vb[..., e2]
                )
        out = SparsePoly(k, nch, iv, vals.reshape(na * nb, nch), self.dv + other.dv)
        return out._merged()

    def apply(self, tables: MomentTables) -> complex:
        k = self.k
        combined = self.vals[:, 0].copy()
        if self.nch > 1:
            for p in range(k):
                rho = tables.rho[p]
                if rho != 0.0:
                    combined += rho * (self.vals[:, 2 + 2 * p] + self.vals[:, 1 + 2 * p])
        factor = np.ones(self.cells, dtype=complex)
        for p in range(k):
            lo = int(self.iv[:, p].min())
            hi = int(self.iv[:, p].max())
            tab = tables.theta_lookup(p, lo, hi)
            factor *= tab[self.iv[:, p] - lo]
        scale = 1.0 + 0.0j
        for p in range(k):
            scale *= tables.dopp_value(p, int(self.dv[p]))
        return complex(np.sum(combined * factor) * scale)


def moment_poly_from_terms(tp: TermPoly, sensitive: bool):
    """Pick the dense representation for few drones, sparse otherwise."""
    if tp.k <= DENSE_MAX_DRONES:
        return DensePoly.from_termpoly(tp, sensitive)
    return SparsePoly.from_termpoly(tp, sensitive)
