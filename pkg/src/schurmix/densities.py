"""Chi-square and beta laws, central and Poisson-mixed noncentral.

All densities accept a scalar or an array for the evaluation point and
return the same shape (a Python float for scalar input).  Noncentral laws
are Poisson mixtures of central components; the mixture is cut at the
smallest index ``K`` whose exact Poisson upper tail ``P(A > K)`` is at most
``ctl.rel_tol``.  Every component integrates to one, so that tail is also a
bound on the neglected probability mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from .errors import ConvergenceError, DomainError
from .specfun import DEFAULT_CONTROL, SeriesControl, log_beta, poisson_upper_tail

__all__ = [
    "NoncentralChi2",
    "NoncentralBeta",
    "chi2_pdf",
    "chi2_cdf",
    "noncentral_chi2_pdf",
    "noncentral_chi2_cdf",
    "beta_pdf_central",
    "beta_pdf_noncentral",
    "beta_cdf_central",
    "beta_cdf_noncentral",
    "poisson_truncation",
]


@dataclass(frozen=True)
class NoncentralChi2:
    """chi^2 law with ``nu`` degrees of freedom and noncentrality ``delta``."""

    nu: int
    delta: float = 0.0

    def __post_init__(self):
        if int(self.nu) != self.nu or self.nu < 1:
            raise DomainError(f"nu must be a positive integer, got {self.nu}")
        if not self.delta >= 0:
            raise DomainError(f"delta must be nonnegative, got {self.delta}")

    @property
    def mean(self) -> float:
        return self.nu + self.delta


@dataclass(frozen=True)
class NoncentralBeta:
    """Beta(a, b, tau): Poisson(tau/2) mixture of Beta(a, b + l) laws.

    The noncentrality enters the second shape, which is the law of the
    mixing statistic of the Schur complement; ``tau = 0`` is the central
    Beta(a, b).
    """

    a: float
    b: float
    tau: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError(f"beta shapes must be positive, got ({self.a}, {self.b})")
        if not self.tau >= 0:
            raise DomainError(f"tau must be nonnegative, got {self.tau}")


def _as_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr, scalar):
    return float(arr) if scalar else arr


def poisson_truncation(mean: float, ctl: SeriesControl = DEFAULT_CONTROL) -> int:
    """Smallest ``K`` with ``P(Poisson(mean) > K) <= ctl.rel_tol``."""
    if mean == 0.0:
        return 0
    k = int(mean)
    while poisson_upper_tail(k, mean) > ctl.rel_tol:
        k += 1 + int(math.sqrt(mean) / 4)
        if k > ctl.max_terms + mean:
            raise ConvergenceError(
                f"Poisson({mean}) tail did not reach {ctl.rel_tol}",
                bound=poisson_upper_tail(k, mean), terms=k,
            )
    # step back to the smallest qualifying index
    while k > 0 and poisson_upper_tail(k - 1, mean) <= ctl.rel_tol:
        k -= 1
    return k


def _poisson_weights(mean: float, ctl: SeriesControl) -> np.ndarray:
    kmax = poisson_truncation(mean, ctl)
    if mean == 0.0:
        return np.ones(1)
    k = np.arange(kmax + 1, dtype=float)
    return np.exp(k * math.log(mean) - mean - sc.gammaln(k + 1))


def _log_chi2_pdf(m, w):
    half = np.asarray(m, dtype=float) / 2.0
    return (half - 1.0) * np.log(w) - w / 2.0 - half * math.log(2.0) - sc.gammaln(half)


def chi2_pdf(m: int, w):
    """Central chi^2_m density ``w^{m/2-1} e^{-w/2} / (2^{m/2} Gamma(m/2))``."""
    if m < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {m}")
    arr, scalar = _as_array(w)
    if np.any(~(arr > 0)):
        raise DomainError("chi2_pdf is evaluated only at w > 0")
    return _out(np.exp(_log_chi2_pdf(m, arr)), scalar)


def chi2_cdf(m: int, w):
    if m < 1:
        raise DomainError(f"degrees of freedom must be >= 1, got {m}")
    arr, scalar = _as_array(w)
    if np.any(~(arr >= 0)):
        raise DomainError("chi2_cdf is evaluated only at w >= 0")
    return _out(sc.gammainc(m / 2.0, arr / 2.0), scalar)


def noncentral_chi2_pdf(d: NoncentralChi2, w, ctl: SeriesControl = DEFAULT_CONTROL):
    """Poisson(delta/2) mixture of chi^2_{nu+2k} densities."""
    arr, scalar = _as_array(w)
    if np.any(~(arr > 0)):
        raise DomainError("noncentral_chi2_pdf is evaluated only at w > 0")
    weights = _poisson_weights(d.delta / 2.0, ctl)
    dof = d.nu + 2.0 * np.arange(weights.size)
    comps = np.exp(_log_chi2_pdf(dof[:, None], arr.reshape(1, -1)))
    return _out((weights @ comps).reshape(arr.shape), scalar)


def noncentral_chi2_cdf(d: NoncentralChi2, w, ctl: SeriesControl = DEFAULT_CONTROL):
    arr, scalar = _as_array(w)
    if np.any(~(arr >= 0)):
        raise DomainError("noncentral_chi2_cdf is evaluated only at w >= 0")
    weights = _poisson_weights(d.delta / 2.0, ctl)
    half_dof = d.nu / 2.0 + np.arange(weights.size)
    comps = sc.gammainc(half_dof[:, None], arr.reshape(1, -1) / 2.0)
    return _out(np.clip(weights @ comps, 0.0, 1.0).reshape(arr.shape), scalar)


def _check_open_unit(arr):
    if np.any(~((arr > 0) & (arr < 1))):
        raise DomainError("beta densities are evaluated only on the open interval (0, 1)")


def beta_pdf_central(a: float, b: float, u):
    """Beta(a, b) density on (0, 1)."""
    arr, scalar = _as_array(u)
    _check_open_unit(arr)
    logpdf = (a - 1.0) * np.log(arr) + (b - 1.0) * np.log1p(-arr) - log_beta(a, b)
    return _out(np.exp(logpdf), scalar)


def beta_pdf_noncentral(d: NoncentralBeta, u, ctl: SeriesControl = DEFAULT_CONTROL):
    """Poisson(tau/2)-weighted sum of Beta(a, b + l) densities."""
    arr, scalar = _as_array(u)
    _check_open_unit(arr)
    weights = _poisson_weights(d.tau / 2.0, ctl)
    l = np.arange(weights.size, dtype=float)
    second = d.b + l
    log_norm = sc.betaln(d.a, second)
    flat = arr.reshape(1, -1)
    logc = ((d.a - 1.0) * np.log(flat) + (second[:, None] - 1.0) * np.log1p(-flat)
            - log_norm[:, None])
    return _out((weights @ np.exp(logc)).reshape(arr.shape), scalar)


def beta_cdf_central(a: float, b: float, u):
    arr, scalar = _as_array(u)
    if np.any(~((arr >= 0) & (arr <= 1))):
        raise DomainError("beta CDF argument must lie in [0, 1]")
    return _out(sc.betainc(a, b, arr), scalar)


def beta_cdf_noncentral(d: NoncentralBeta, u, ctl: SeriesControl = DEFAULT_CONTROL):
    """CDF of Beta(a, b, tau), integrating the Poisson mixture term by term."""
    arr, scalar = _as_array(u)
    if np.any(~((arr >= 0) & (arr <= 1))):
        raise DomainError("beta CDF argument must lie in [0, 1]")
    weights = _poisson_weights(d.tau / 2.0, ctl)
    second = d.b + np.arange(weights.size, dtype=float)
    comps = sc.betainc(d.a, second[:, None], arr.reshape(1, -1))
    return _out(np.clip(weights @ comps, 0.0, 1.0).reshape(arr.shape), scalar)
