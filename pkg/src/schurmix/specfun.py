"""Scalar special functions: gamma family, Poisson mass, Kummer 1F1, Appell Phi2.

The two hypergeometric functions are summed so that every series that is
actually accumulated has positive terms:

* ``1F1(b; c; w)`` for ``w < 0`` goes through Kummer's transformation
  ``1F1(b; c; w) = e^w 1F1(c - b; c; -w)``.  When ``c <= b`` the transformed
  series would alternate, so the value is instead obtained from two
  positive-series evaluations at ``c + N``, ``c + N + 1`` (with ``c + N > b``)
  and the three-term contiguous relation in ``c`` run downwards.  The Kummer
  function is the minimal solution of that recurrence as ``c`` grows, so the
  downward direction is the stable one.
* ``Phi2(b, b'; c; w, z)`` with ``z >= 0`` is summed over the ``z`` index,

      Phi2 = sum_m (b')_m / (c)_m * z^m / m! * 1F1(b; c + m; w),

  reusing the stabilised ``1F1`` for every inner factor.

Truncation of a positive series uses a certified geometric bound on the
remainder: once every later term ratio is bounded by ``R < 1``, the tail after
term ``t`` is at most ``t R / (1 - R)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sc

from .errors import ConvergenceError, DomainError

__all__ = [
    "SeriesControl",
    "DEFAULT_CONTROL",
    "log_gamma",
    "beta_fn",
    "log_beta",
    "rising_factorial",
    "poisson_pmf",
    "poisson_upper_tail",
    "reg_lower_inc_gamma",
    "kummer_1f1",
    "appell_phi2",
]

# Below this index rising factorials are plain products.
_LOG_SPACE_INDEX = 30


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for infinite series.

    A positive-term series stops once its certified remainder drops below
    ``rel_tol`` times the running partial sum; ``max_terms`` caps every
    series index.
    """

    rel_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self):
        if not (0.0 < self.rel_tol < 1.0):
            raise DomainError(f"rel_tol must lie in (0, 1), got {self.rel_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise DomainError(f"max_terms must be a positive integer, got {self.max_terms}")


DEFAULT_CONTROL = SeriesControl()


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def log_beta(k: float, l: float) -> float:
    if not (k > 0 and l > 0):
        raise DomainError(f"beta function requires positive arguments, got ({k}, {l})")
    return math.lgamma(k) + math.lgamma(l) - math.lgamma(k + l)


def beta_fn(k: float, l: float) -> float:
    """B(k, l) = Gamma(k) Gamma(l) / Gamma(k + l), evaluated in log space."""
    return math.exp(log_beta(k, l))


def rising_factorial(x: float, n: int) -> float:
    """Pochhammer symbol ``(x)_n = x (x + 1) ... (x + n - 1)``."""
    if n < 0 or int(n) != n:
        raise DomainError(f"rising_factorial needs a nonnegative integer index, got {n}")
    n = int(n)
    if n > _LOG_SPACE_INDEX and x > 0:
        return math.exp(math.lgamma(x + n) - math.lgamma(x))
    out = 1.0
    for j in range(n):
        out *= x + j
    return out


def poisson_pmf(k: int, mean: float) -> float:
    """P(A = k) for A ~ Poisson(mean), computed in log space."""
    if mean < 0 or math.isnan(mean):
        raise DomainError(f"Poisson mean must be nonnegative, got {mean}")
    if k < 0:
        return 0.0
    if mean == 0.0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(mean) - mean - math.lgamma(k + 1))


def poisson_upper_tail(k: int, mean: float) -> float:
    """P(A > k) for A ~ Poisson(mean), without cancellation."""
    if mean == 0.0:
        return 0.0 if k >= 0 else 1.0
    return float(_sc.pdtrc(k, mean))


def reg_lower_inc_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x) = gamma(a, x) / Gamma(a)``."""
    if not a > 0:
        raise DomainError(f"reg_lower_inc_gamma requires a > 0, got {a}")
    if not x >= 0:
        raise DomainError(f"reg_lower_inc_gamma requires x >= 0, got {x}")
    if x == 0.0:
        return 0.0
    return float(_sc.gammainc(a, x))


def _positive_series(b: float, c: float, w: float, ctl: SeriesControl) -> tuple[float, float]:
    """Sum ``sum_l (b)_l / (c)_l w^l / l!`` for ``b >= 0, c > 0, w >= 0``.

    Returns the value and a certified bound on the neglected tail.
    """
    term = 1.0
    total = 1.0
    if w == 0.0 or b == 0.0:
        return total, 0.0
    for l in range(ctl.max_terms):
        term *= (b + l) / (c + l) * w / (l + 1)
        total += term
        # every later ratio is at most w/(j+1) * sup_{j>l} (b+j)/(c+j)
        nxt = l + 1
        rbound = w / (nxt + 1) * max(1.0, (b + nxt) / (c + nxt))
        if rbound < 1.0:
            tail = term * rbound / (1.0 - rbound)
            if tail <= ctl.rel_tol * total:
                return total, tail
    raise ConvergenceError(
        f"1F1({b}; {c}; {w}) did not converge in {ctl.max_terms} terms",
        partial_sum=total, bound=term, terms=ctl.max_terms,
    )


def _positive_series_many(b: float, cs, w: float, ctl: SeriesControl = DEFAULT_CONTROL):
    """Vector of ``1F1(b; c; w)`` over an array ``cs`` of ``c`` values, ``w >= 0``.

    Term ``j`` is at most ``(w q)^j / j!`` with ``q = max(1, b / min(cs))``,
    so one cutoff ``J`` with ``e^{wq} P(Poisson(wq) > J) <= rel_tol`` serves
    every column (each sum is at least 1).
    """
    cs = np.asarray(cs, dtype=float)
    if w == 0.0 or b == 0.0:
        return np.ones_like(cs)
    weff = w * max(1.0, b / float(cs.min()))
    log_tol = math.log(ctl.rel_tol)
    J = int(weff) + 1
    while True:
        tail = _sc.pdtrc(J, weff)
        if tail == 0.0 or math.log(tail) + weff <= log_tol:
            break
        J += 1 + int(math.sqrt(weff) / 2)
        if J > ctl.max_terms:
            partial = _capped_sums(b, cs, w, ctl.max_terms)
            raise ConvergenceError(
                f"1F1({b}; c; {w}) needs more than {ctl.max_terms} terms",
                partial_sum=float(partial.max()), bound=float(tail), terms=ctl.max_terms,
            )
    return _capped_sums(b, cs, w, J)


def _capped_sums(b: float, cs: np.ndarray, w: float, J: int) -> np.ndarray:
    j = np.arange(J, dtype=float)
    ratios = (b + j)[:, None] / (cs[None, :] + j[:, None]) * (w / (j + 1.0))[:, None]
    return 1.0 + np.cumprod(ratios, axis=0).sum(axis=0)


def _kummer_direct(b: float, c: float, w: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Plain summation of the defining series, alternating when ``w < 0``.

    Not used for production values; kept for regression comparisons.
    """
    term = 1.0
    total = 1.0
    for l in range(ctl.max_terms):
        term *= (b + l) / (c + l) * w / (l + 1)
        total += term
        if l > abs(w) and abs(term) <= ctl.rel_tol * abs(total):
            return total
    raise ConvergenceError(
        f"direct 1F1({b}; {c}; {w}) did not converge",
        partial_sum=total, bound=abs(term), terms=ctl.max_terms,
    )


def kummer_1f1(b: float, c: float, w: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Confluent hypergeometric function ``1F1(b; c; w)`` for ``b, c > 0``.

    Nonnegative ``w`` sums the defining series directly.  Negative ``w`` is
    routed through Kummer's transformation (and, when ``c <= b``, the
    downward contiguous recurrence in ``c``), so no alternating series is
    ever accumulated.
    """
    if not (b > 0 and c > 0):
        raise DomainError(f"kummer_1f1 requires b > 0 and c > 0, got b={b}, c={c}")
    if math.isnan(w):
        raise DomainError("kummer_1f1 argument is NaN")
    if w >= 0.0:
        return _positive_series(b, c, w, ctl)[0]
    if c > b:
        return math.exp(w) * _positive_series(c - b, c, -w, ctl)[0]
    return math.exp(w) * _scaled_recurrence(b, c, w, ctl)


def _scaled_recurrence(b: float, c: float, w: float, ctl: SeriesControl) -> float:
    """``e^{-w} 1F1(b; c; w)`` for ``w < 0`` and ``c <= b``.

    Starts from two positive-series values above ``b`` and applies

        c(c+1) M(c) = (c+1)(c+w) M(c+1) - w(c+1-b) M(c+2)

    downwards.  The common factor ``e^w`` cancels out of the recurrence.
    """
    shift = int(math.floor(b - c)) + 1
    hi = c + shift
    m_next2 = _positive_series(hi + 1 - b, hi + 1, -w, ctl)[0]
    m_next1 = _positive_series(hi - b, hi, -w, ctl)[0]
    for j in range(shift - 1, -1, -1):
        cc = c + j
        cur = ((cc + 1) * (cc + w) * m_next1 - w * (cc + 1 - b) * m_next2) / ((cc + 1) * cc)
        m_next2, m_next1 = m_next1, cur
    return m_next1


def appell_phi2(b: float, b2: float, c: float, w: float, z: float,
                ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Confluent Appell (Humbert) function ``Phi2(b, b2; c; w, z)`` for ``z >= 0``."""
    if not (b > 0 and b2 > 0 and c > 0):
        raise DomainError(f"appell_phi2 requires b, b2, c > 0, got ({b}, {b2}, {c})")
    if not z >= 0:
        raise DomainError(f"appell_phi2 requires z >= 0, got {z}")
    inner0 = kummer_1f1(b, c, w, ctl)
    if z == 0.0:
        return inner0
    weight = 1.0
    total = inner0
    inner = inner0
    for m in range(ctl.max_terms):
        weight *= (b2 + m) / (c + m) * z / (m + 1)
        inner = kummer_1f1(b, c + m + 1, w, ctl)
        total += weight * inner
        nxt = m + 1
        # sup of later inner factors: decreasing in c for w >= 0, within (0, 1]
        # for w < 0 once c + m exceeds b
        if w >= 0.0:
            inner_sup = inner
        elif c + nxt > b:
            inner_sup = 1.0
        else:
            continue
        rbound = z / (nxt + 1) * max(1.0, (b2 + nxt) / (c + nxt))
        if rbound < 1.0:
            tail = weight * inner_sup * rbound / (1.0 - rbound)
            if tail <= ctl.rel_tol * abs(total):
                return total
    raise ConvergenceError(
        f"Phi2({b}, {b2}; {c}; {w}, {z}) did not converge in {ctl.max_terms} terms",
        partial_sum=total, bound=abs(weight * inner), terms=ctl.max_terms,
    )
