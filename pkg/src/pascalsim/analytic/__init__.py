"""Closed-form SER machinery: special functions, Gaussian trigonometric
moments, series expansions of the equalized decision variable, and the
hybrid truncated-series average-SER approximation."""

from .special import erf_complex, hermite_poly, q_derivative, q_function
from .moments import (
    gaussian_trig_moment,
    inv_gain_moment,
    trig_moment_linear,
    trig_moment_triple,
    truncated_gaussian_phasor,
)
from .context import ApproxConfig, MomentContext
from .expansion import gamma_expansion, nu_expansion
from .sermath import (
    ConditionalSerTerms,
    average_ser,
    average_ser_semianalytic,
    conditional_ser,
    conditional_ser_terms,
    gamma_moments,
    moment_nu_power,
)

__all__ = [
    "ApproxConfig",
    "ConditionalSerTerms",
    "MomentContext",
    "average_ser",
    "average_ser_semianalytic",
    "conditional_ser",
    "conditional_ser_terms",
    "erf_complex",
    "gamma_expansion",
    "gamma_moments",
    "gaussian_trig_moment",
    "hermite_poly",
    "inv_gain_moment",
    "moment_nu_power",
    "nu_expansion",
    "q_derivative",
    "q_function",
    "trig_moment_linear",
    "trig_moment_triple",
    "truncated_gaussian_phasor",
]
