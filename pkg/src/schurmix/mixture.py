"""Chi-square mixture law of the scaled Schur complement rho.

rho is distributed as ``sum_k beta_k chi^2_{nu+2k}``.  Writing ``a = nu/2``,
``c = n/2``, ``x = lam/2`` and ``pi_l`` for the Poisson(tau/2) masses,

    beta_k = sum_l pi_l * x^k/k! * (a)_k/(c+l)_k * 1F1(a+k; c+l+k; -x)

(a single ``l = 0`` term with ``pi_0 = 1`` when tau = 0).  Kummer's
transformation turns every factor into ``e^{-x} 1F1(c-a+l; c+l+k; x)``, a
positive series, evaluated for a whole range of ``k`` at once.  For a fixed
``l`` the inner weights are themselves a probability sequence in ``k`` (the
central-beta weights with ``c -> c + l``), which gives a certified stopping
rule for both loops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy import special as sc

from . import densities
from .errors import ConvergenceError, DomainError
from .model import Case, DerivedParams
from .specfun import (
    DEFAULT_CONTROL,
    SeriesControl,
    _positive_series_many,
    appell_phi2,
    kummer_1f1,
    poisson_pmf,
)

__all__ = [
    "DEFAULT_TOL",
    "MixtureWeights",
    "RhoLaw",
    "weights",
    "weight_phi2",
    "mgf",
    "pgf",
    "pdf_rho",
    "pdf_rho_bound",
    "cdf_rho",
    "cdf_rho_interval",
    "pdf_w11dot2",
    "cdf_w11dot2",
    "mean_rho",
    "mixing_mean",
]

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class MixtureWeights:
    """Truncated weights ``beta_0 .. beta_K`` and the neglected mass."""

    betas: np.ndarray
    tail_mass: float

    def __post_init__(self):
        b = np.array(self.betas, dtype=float)
        b.setflags(write=False)
        object.__setattr__(self, "betas", b)

    @property
    def K(self) -> int:
        return self.betas.size - 1

    def __len__(self) -> int:
        return self.betas.size

    def total(self) -> float:
        return math.fsum(self.betas)


def _shapes(params: DerivedParams) -> tuple[float, float, float]:
    a = params.nu / 2.0
    c = params.n / 2.0
    return a, c - a, c


def weights(params: DerivedParams, tol: float = DEFAULT_TOL,
            ctl: SeriesControl = DEFAULT_CONTROL) -> MixtureWeights:
    """Mixture weights with ``tail_mass <= tol``.

    The Central regime is the degenerate sequence ``(1,)``.
    """
    if not 0.0 < tol < 1.0:
        raise DomainError(f"tol must lie in (0, 1), got {tol}")
    x = params.lam / 2.0
    if params.case is Case.CENTRAL or x == 0.0:
        return MixtureWeights(np.ones(1), 0.0)
    a, bshape, c = _shapes(params)
    half = tol / 2.0

    if params.case is Case.CENTRAL_BETA or params.tau == 0.0:
        pois = [1.0]
    else:
        z = params.tau / 2.0
        lmax = densities.poisson_truncation(z, SeriesControl(half, ctl.max_terms))
        pois = [poisson_pmf(l, z) for l in range(lmax + 1)]

    log_x = math.log(x)
    acc = np.zeros(0)
    guess = int(x + 10.0 * math.sqrt(x)) + 20
    for l, pl in enumerate(pois):
        # inner sequence: central-beta weights with c -> c + l, a probability law in k
        while True:
            k = np.arange(guess + 1, dtype=float)
            factor = _positive_series_many(bshape + l, c + l + k, x, ctl)
            steps = log_x - np.log(k[:-1] + 1.0) + np.log(a + k[:-1]) - np.log(c + l + k[:-1])
            log_r = -x + np.concatenate(([0.0], np.cumsum(steps)))
            inner = np.exp(log_r) * factor
            done = np.nonzero(1.0 - np.cumsum(inner) <= half)[0]
            if done.size:
                inner = inner[: done[0] + 1]
                break
            if guess >= ctl.max_terms:
                raise ConvergenceError(
                    f"mixture weights did not reach tail {half} within {ctl.max_terms} terms",
                    partial_sum=float(inner.sum()), bound=1.0 - float(inner.sum()), terms=guess,
                )
            guess = min(2 * guess, ctl.max_terms)
        if inner.size > acc.size:
            acc = np.concatenate((acc, np.zeros(inner.size - acc.size)))
        acc[: inner.size] += pl * inner
    tail = max(0.0, 1.0 - math.fsum(acc))
    return MixtureWeights(acc, tail)


def weight_phi2(params: DerivedParams, k: int, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Single weight from its closed Appell form.

    ``beta_k = x^k/k! (a)_k/(c)_k e^{-tau/2} Phi2(a+k, c; c+k; -x, tau/2)``.
    Independent of the summation order used by :func:`weights`.
    """
    if k < 0:
        return 0.0
    x = params.lam / 2.0
    if params.case is Case.CENTRAL or x == 0.0:
        return 1.0 if k == 0 else 0.0
    a, _, c = _shapes(params)
    tau = params.tau if params.case is Case.NONCENTRAL_BETA else 0.0
    log_pref = (k * math.log(x) - math.lgamma(k + 1) + math.lgamma(a + k) - math.lgamma(a)
                - math.lgamma(c + k) + math.lgamma(c) - tau / 2.0)
    return math.exp(log_pref) * appell_phi2(a + k, c, c + k, -x, tau / 2.0, ctl)


def _check_theta(theta: float) -> None:
    if not theta < 0.5:
        raise DomainError(f"MGF argument must satisfy theta < 1/2, got {theta}")


def mgf(params: DerivedParams, theta: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Moment generating function ``E[exp(theta rho)]`` for ``theta < 1/2``."""
    _check_theta(theta)
    a, _, c = _shapes(params)
    pref = (1.0 - 2.0 * theta) ** (-a)
    if params.case is Case.CENTRAL:
        return pref
    w = params.lam * theta / (1.0 - 2.0 * theta)
    if params.case is Case.CENTRAL_BETA:
        return pref * kummer_1f1(a, c, w, ctl)
    z = params.tau / 2.0
    return pref * math.exp(-z) * appell_phi2(a, c, c, w, z, ctl)


def pgf(params: DerivedParams, s: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Probability generating function ``sum_k beta_k s^k`` of the weights."""
    if params.case is Case.CENTRAL or s == 1.0:
        # total probability, exact rather than e^{-z} times a truncated e^{z}
        return 1.0
    a, _, c = _shapes(params)
    w = params.lam / 2.0 * (s - 1.0)
    if params.case is Case.CENTRAL_BETA:
        return kummer_1f1(a, c, w, ctl)
    z = params.tau / 2.0
    return math.exp(-z) * appell_phi2(a, c, c, w, z, ctl)


def _log_chi2_components(nu: int, K: int, w: np.ndarray) -> np.ndarray:
    half = nu / 2.0 + np.arange(K + 1, dtype=float)
    return ((half[:, None] - 1.0) * np.log(w[None, :]) - w[None, :] / 2.0
            - half[:, None] * math.log(2.0) - sc.gammaln(half)[:, None])


def _as_points(w, positive: bool):
    arr = np.asarray(w, dtype=float)
    bad = ~(arr > 0) if positive else ~(arr >= 0)
    if np.any(bad):
        raise DomainError("rho density needs w > 0" if positive else "rho CDF needs w >= 0")
    return arr, arr.ndim == 0


def _resolve(params, tol, ctl, mix):
    return mix if mix is not None else weights(params, tol, ctl)


def pdf_rho(params: DerivedParams, w, tol: float = DEFAULT_TOL,
            ctl: SeriesControl = DEFAULT_CONTROL, mix: MixtureWeights | None = None):
    """Density of rho: ``sum_k beta_k g_{nu+2k}(w)``."""
    arr, scalar = _as_points(w, positive=True)
    if params.case is Case.CENTRAL:
        return densities.chi2_pdf(params.nu, w)
    mix = _resolve(params, tol, ctl, mix)
    flat = arr.reshape(-1)
    vals = mix.betas @ np.exp(_log_chi2_components(params.nu, mix.K, flat))
    vals = vals.reshape(arr.shape)
    return float(vals) if scalar else vals


def pdf_rho_bound(params: DerivedParams, w, tol: float = DEFAULT_TOL,
                  ctl: SeriesControl = DEFAULT_CONTROL, mix: MixtureWeights | None = None):
    """Pointwise bound on the density dropped by truncation.

    The neglected weights sum to ``tail_mass`` and may sit on any component,
    so the error at ``w`` is at most ``tail_mass * max_k g_{nu+2k}(w)``.
    Since ``g_{m+2}(w) / g_m(w) = w / m``, the maximum is attained at the
    smallest ``m = nu + 2k`` with ``m >= w``.
    """
    arr, scalar = _as_points(w, positive=True)
    if params.case is Case.CENTRAL:
        out = np.zeros(arr.shape)
        return float(out) if scalar else out
    mix = _resolve(params, tol, ctl, mix)
    m = params.nu + 2.0 * np.maximum(0.0, np.ceil((arr - params.nu) / 2.0))
    half = m / 2.0
    peak = np.exp((half - 1.0) * np.log(arr) - arr / 2.0 - half * math.log(2.0) - sc.gammaln(half))
    out = mix.tail_mass * peak
    return float(out) if scalar else out


def cdf_rho(params: DerivedParams, w, tol: float = DEFAULT_TOL,
            ctl: SeriesControl = DEFAULT_CONTROL, mix: MixtureWeights | None = None):
    """Lower end of the certified CDF interval (see :func:`cdf_rho_interval`)."""
    arr, scalar = _as_points(w, positive=False)
    if params.case is Case.CENTRAL:
        return densities.chi2_cdf(params.nu, w)
    mix = _resolve(params, tol, ctl, mix)
    flat = arr.reshape(-1)
    half = params.nu / 2.0 + np.arange(mix.K + 1, dtype=float)
    vals = mix.betas @ sc.gammainc(half[:, None], flat[None, :] / 2.0)
    vals = np.clip(vals, 0.0, 1.0).reshape(arr.shape)
    return float(vals) if scalar else vals


def cdf_rho_interval(params: DerivedParams, w, tol: float = DEFAULT_TOL,
                     ctl: SeriesControl = DEFAULT_CONTROL, mix: MixtureWeights | None = None):
    """``(lower, upper)``: the truncated sum and the sum plus the tail mass."""
    mix = _resolve(params, tol, ctl, mix) if params.case is not Case.CENTRAL else MixtureWeights(np.ones(1), 0.0)
    lower = cdf_rho(params, w, tol, ctl, mix)
    upper = np.minimum(np.asarray(lower) + mix.tail_mass, 1.0)
    return lower, (float(upper) if np.ndim(upper) == 0 else upper)


def pdf_w11dot2(params: DerivedParams, w, tol: float = DEFAULT_TOL,
                ctl: SeriesControl = DEFAULT_CONTROL, mix: MixtureWeights | None = None):
    """Density of the unscaled Schur complement ``sigma112 * rho``."""
    s = params.sigma112
    return pdf_rho(params, np.asarray(w, dtype=float) / s, tol, ctl, mix) / s


def cdf_w11dot2(params: DerivedParams, w, tol: float = DEFAULT_TOL,
                ctl: SeriesControl = DEFAULT_CONTROL, mix: MixtureWeights | None = None):
    return cdf_rho(params, np.asarray(w, dtype=float) / params.sigma112, tol, ctl, mix)


def mixing_mean(params: DerivedParams, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """E[u] under the mixing law.

    Central-beta mean ``a / c`` in closed form; the noncentral law is
    integrated numerically with the endpoint singularities handled by an
    algebraic weight.
    """
    a, b, c = _shapes(params)
    if params.case is Case.CENTRAL:
        return 0.0
    if params.case is Case.CENTRAL_BETA or params.tau == 0.0:
        return a / c
    z = params.tau / 2.0
    lmax = densities.poisson_truncation(z, ctl)
    l = np.arange(lmax + 1, dtype=float)
    coef = np.exp(l * math.log(z) - z - sc.gammaln(l + 1) - sc.betaln(a, b + l))

    def integrand(u):
        return u * float(coef @ (1.0 - u) ** l)

    val, _ = integrate.quad(integrand, 0.0, 1.0, weight="alg", wvar=(a - 1.0, b - 1.0),
                            limit=256, epsabs=1e-14, epsrel=1e-12)
    return val


def mean_rho(params: DerivedParams, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """E[rho] = nu + lam E[u]."""
    if params.case is Case.CENTRAL:
        return float(params.nu)
    return params.nu + params.lam * mixing_mean(params, ctl)


@dataclass(frozen=True)
class RhoLaw:
    """The law of rho with its weights computed once and reused.

    Safe to share between threads: nothing is mutated after construction.
    """

    params: DerivedParams
    tol: float = DEFAULT_TOL
    ctl: SeriesControl = DEFAULT_CONTROL
    mix: MixtureWeights = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mix", weights(self.params, self.tol, self.ctl))

    def pdf(self, w):
        return pdf_rho(self.params, w, self.tol, self.ctl, self.mix)

    def cdf(self, w):
        return cdf_rho(self.params, w, self.tol, self.ctl, self.mix)

    def cdf_interval(self, w):
        return cdf_rho_interval(self.params, w, self.tol, self.ctl, self.mix)

    def pdf_w11dot2(self, w):
        return pdf_w11dot2(self.params, w, self.tol, self.ctl, self.mix)

    def cdf_w11dot2(self, w):
        return cdf_w11dot2(self.params, w, self.tol, self.ctl, self.mix)

    def mgf(self, theta: float) -> float:
        return mgf(self.params, theta, self.ctl)

    def pgf(self, s: float) -> float:
        return pgf(self.params, s, self.ctl)

    def mean(self) -> float:
        return mean_rho(self.params, self.ctl)

    def pdf_bound(self, w):
        return pdf_rho_bound(self.params, w, self.tol, self.ctl, self.mix)
