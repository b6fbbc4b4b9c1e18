"""Gaussian matrix model, derived distribution parameters and regime tags.

The model is ``X ~ N(M, I_n (x) Sigma)``: ``n`` independent rows, each with
covariance ``Sigma``.  Splitting off the first column,

* ``sigma112 = sigma11 - sigma21' Sigma22^{-1} sigma21``
* ``m1_tilde = m1 - M2 Sigma22^{-1} sigma21``
* ``lam = |m1_tilde|^2 / sigma112``, ``tau = tr(Sigma22^{-1} M2' M2)``
* ``nu = n - p + 1``

Solves against ``Sigma22`` always go through its Cholesky factor.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np
from scipy.linalg import cho_solve, lapack, solve_triangular

from .errors import CaseError, DefinitenessError, DomainError, RankError, SchemaError

__all__ = [
    "Case",
    "GaussianMatrixSpec",
    "DerivedParams",
    "SPDFactor",
    "ModelInput",
    "spd_factor",
    "derive_params",
    "rank1_check",
    "conditional_noncentrality",
    "canonical_spec",
    "parse_model",
    "load_model",
]

ZERO_TOL = 1e-12
RANK_TOL = 1e-8
SYMMETRY_TOL = 1e-12


class Case(str, enum.Enum):
    CENTRAL = "Central"
    CENTRAL_BETA = "CentralBeta"
    NONCENTRAL_BETA = "NoncentralBeta"


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SPDFactor:
    """Lower Cholesky factor ``L`` with ``L L' = A``."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def solve(self, b):
        """Solve ``A x = b``."""
        return cho_solve((self.lower, True), b)

    def solve_lower(self, b):
        """Solve ``L y = b``; ``|y|^2 = b' A^{-1} b`` for a vector ``b``."""
        return solve_triangular(self.lower, b, lower=True)

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T


def spd_factor(A, sym_tol: float = SYMMETRY_TOL) -> SPDFactor:
    """Cholesky factor of a symmetric positive-definite matrix.

    Raises ``DefinitenessError`` carrying the 0-based index of the first
    nonpositive pivot.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DomainError("matrix has non-finite entries")
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    if np.abs(A - A.T).max() > sym_tol * scale:
        raise DomainError("matrix is not symmetric within tolerance")
    c, info = lapack.dpotrf(A, lower=1, clean=1)
    if info > 0:
        raise DefinitenessError(
            f"matrix is not positive definite: pivot {info - 1} (0-based) failed",
            pivot=info - 1,
        )
    if info < 0:
        raise DomainError(f"dpotrf rejected argument {-info}")
    return SPDFactor(_frozen(c))


@dataclass(frozen=True)
class GaussianMatrixSpec:
    """Mean ``M`` (n x p) and row covariance ``Sigma`` (p x p)."""

    M: np.ndarray
    Sigma: np.ndarray
    factor: SPDFactor = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        M = _frozen(self.M)
        S = _frozen(self.Sigma)
        if M.ndim != 2:
            raise DomainError(f"M must be a matrix, got shape {M.shape}")
        n, p = M.shape
        if p < 2:
            raise DomainError(f"need p >= 2 columns, got {p}")
        if n < p:
            raise DomainError(f"need n >= p so that nu = n - p + 1 >= 1, got n={n}, p={p}")
        if S.shape != (p, p):
            raise DomainError(f"Sigma must be {p}x{p}, got {S.shape}")
        if not np.all(np.isfinite(M)):
            raise DomainError("M has non-finite entries")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "Sigma", S)
        object.__setattr__(self, "factor", spd_factor(S))

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def p(self) -> int:
        return self.M.shape[1]

    def to_json(self) -> dict:
        return {"n": self.n, "p": self.p, "M": self.M.tolist(), "Sigma": self.Sigma.tolist()}

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (used in output metadata)."""
        text = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class DerivedParams:
    nu: int
    p: int
    sigma112: float
    m1_tilde: tuple[float, ...]
    lam: float
    tau: float
    case: Case

    def __post_init__(self):
        if int(self.nu) != self.nu or self.nu < 1:
            raise DomainError(f"nu must be a positive integer, got {self.nu}")
        if int(self.p) != self.p or self.p < 2:
            raise DomainError(f"p must be an integer >= 2, got {self.p}")
        if not self.sigma112 > 0:
            raise DomainError(f"sigma112 must be positive, got {self.sigma112}")
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise DomainError(f"lambda must be finite and nonnegative, got {self.lam}")
        if not (self.tau >= 0 and math.isfinite(self.tau)):
            raise DomainError(f"tau must be finite and nonnegative, got {self.tau}")
        object.__setattr__(self, "case", Case(self.case))
        object.__setattr__(self, "m1_tilde", tuple(float(v) for v in self.m1_tilde))

    @property
    def n(self) -> int:
        return self.nu + self.p - 1

    @classmethod
    def direct(cls, nu: int, lam: float, tau: float, p: int,
               case: Case | str | None = None) -> "DerivedParams":
        """Parameters given directly; ``sigma112 = 1`` and ``m1_tilde = sqrt(lam) e_1``.

        Unless ``case`` is forced, ``lam == 0`` is Central, ``tau == 0`` is
        CentralBeta and anything else NoncentralBeta.
        """
        if case is None:
            if lam == 0:
                case = Case.CENTRAL
            elif tau == 0:
                case = Case.CENTRAL_BETA
            else:
                case = Case.NONCENTRAL_BETA
        n = int(nu) + int(p) - 1
        m1 = [0.0] * n
        m1[0] = math.sqrt(lam) if lam > 0 else 0.0
        return cls(nu=int(nu), p=int(p), sigma112=1.0, m1_tilde=tuple(m1),
                   lam=float(lam), tau=float(tau), case=case)

    def to_json(self) -> dict:
        return {"case": self.case.value, "nu": self.nu, "p": self.p, "n": self.n,
                "lambda": self.lam, "tau": self.tau, "sigma112": self.sigma112}


def rank1_check(M, tol: float = RANK_TOL) -> bool:
    """True iff the second singular value of ``M`` is at most ``tol`` times the first."""
    s = np.linalg.svd(np.asarray(M, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        raise RankError("mean matrix is zero; rank check undefined")
    return s.size < 2 or bool(s[1] <= tol * s[0])


def derive_params(spec: GaussianMatrixSpec, tol: float = ZERO_TOL,
                  rank_tol: float = RANK_TOL) -> DerivedParams:
    M, S = spec.M, spec.Sigma
    m1, M2 = M[:, 0], M[:, 1:]
    f22 = spd_factor(S[1:, 1:])
    s21 = S[1:, 0]
    coef = f22.solve(s21)
    sigma112 = float(S[0, 0] - s21 @ coef)
    if not sigma112 > 0:
        raise DefinitenessError(f"Schur complement sigma112 = {sigma112} is not positive", pivot=0)
    m1t = m1 - M2 @ coef
    tau = float(np.sum(f22.solve_lower(M2.T) ** 2))
    nu = spec.n - spec.p + 1

    if np.linalg.norm(m1t) <= tol * (1.0 + np.linalg.norm(m1)):
        return DerivedParams(nu, spec.p, sigma112, np.zeros_like(m1t), 0.0, tau, Case.CENTRAL)
    lam = float(m1t @ m1t / sigma112)
    if np.linalg.norm(M2) <= tol * (1.0 + np.linalg.norm(M)):
        return DerivedParams(nu, spec.p, sigma112, m1t, lam, 0.0, Case.CENTRAL_BETA)
    if not rank1_check(M, rank_tol):
        raise RankError("mean matrix has rank > 1; only rank-1 noncentrality is supported")
    return DerivedParams(nu, spec.p, sigma112, m1t, lam, tau, Case.NONCENTRAL_BETA)


def conditional_noncentrality(params: DerivedParams, u: float) -> float:
    """Noncentrality ``lam * u`` of the chi^2 law of rho given u."""
    if not 0.0 <= u <= 1.0:
        raise DomainError(f"u must lie in [0, 1], got {u}")
    return params.lam * u


def canonical_spec(params: DerivedParams) -> GaussianMatrixSpec:
    """A Gaussian model realising ``params``.

    Block-diagonal ``Sigma = diag(sigma112, I)`` and a mean whose only
    nonzero row is ``(sqrt(lam sigma112), sqrt(tau), 0, ...)``.
    """
    n, p = params.n, params.p
    Sigma = np.eye(p)
    Sigma[0, 0] = params.sigma112
    M = np.zeros((n, p))
    if params.case is not Case.CENTRAL:
        M[0, 0] = math.sqrt(params.lam * params.sigma112)
        if params.case is Case.NONCENTRAL_BETA:
            M[0, 1] = math.sqrt(params.tau)
    return GaussianMatrixSpec(M, Sigma)


@dataclass(frozen=True)
class ModelInput:
    """A parsed model document.

    ``params`` drives every analytic formula and ``gaussian`` every
    simulation.  They agree unless the document deliberately overrides
    ``lambda``/``tau`` next to a matrix model.
    """

    params: DerivedParams
    gaussian: GaussianMatrixSpec
    source: Mapping[str, Any] = field(default_factory=dict, repr=False, compare=False)


_MATRIX_KEYS = ("n", "p", "M", "Sigma")
_DIRECT_KEYS = ("nu", "lambda", "tau", "p")


def _number(doc, key, kind=float):
    if key not in doc:
        raise SchemaError("missing required key", field=key)
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"expected a number, got {type(v).__name__}", field=key)
    if kind is int:
        if int(v) != v:
            raise SchemaError(f"expected an integer, got {v}", field=key)
        return int(v)
    if not math.isfinite(v):
        raise SchemaError("value must be finite", field=key)
    return float(v)


def _matrix(doc, key, rows, cols):
    v = doc.get(key)
    if not isinstance(v, list) or len(v) != rows:
        raise SchemaError(f"expected a list of {rows} rows", field=key)
    for i, row in enumerate(v):
        if not isinstance(row, list) or len(row) != cols:
            raise SchemaError(f"row {i} must have {cols} entries", field=key)
        for x in row:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise SchemaError(f"row {i} has a non-numeric entry", field=key)
    return np.array(v, dtype=float)


def parse_model(doc: Mapping[str, Any]) -> ModelInput:
    """Build a model from either accepted JSON layout.

    Matrix form: ``{"n", "p", "M", "Sigma"}``.  Direct form:
    ``{"nu", "lambda", "tau", "p"}``.  When both are present the matrix part
    is simulated while the direct values feed the analytic side.
    """
    if not isinstance(doc, Mapping):
        raise SchemaError("model document must be a JSON object")
    has_matrix = "M" in doc or "Sigma" in doc
    has_direct = any(k in doc for k in ("nu", "lambda", "tau"))
    if not (has_matrix or has_direct):
        raise SchemaError("document has neither matrix keys (M, Sigma) nor direct keys (nu, lambda, tau)")

    gaussian = None
    if has_matrix:
        n = _number(doc, "n", int)
        p = _number(doc, "p", int)
        if n < 1 or p < 2:
            raise SchemaError("need n >= 1 and p >= 2", field="p" if p < 2 else "n")
        M = _matrix(doc, "M", n, p)
        Sigma = _matrix(doc, "Sigma", p, p)
        gaussian = GaussianMatrixSpec(M, Sigma)

    if has_direct:
        nu = _number(doc, "nu", int)
        lam = _number(doc, "lambda")
        tau = _number(doc, "tau")
        p = _number(doc, "p", int)
        if nu < 1:
            raise SchemaError("nu must be >= 1", field="nu")
        if p < 2:
            raise SchemaError("p must be >= 2", field="p")
        if lam < 0:
            raise SchemaError("lambda must be >= 0", field="lambda")
        if tau < 0:
            raise SchemaError("tau must be >= 0", field="tau")
        params = DerivedParams.direct(nu, lam, tau, p)
        if gaussian is None:
            gaussian = canonical_spec(params)
        elif gaussian.n - gaussian.p + 1 != nu or gaussian.p != p:
            raise SchemaError("direct nu/p disagree with the matrix model", field="nu")
    else:
        params = derive_params(gaussian)
    return ModelInput(params=params, gaussian=gaussian, source=dict(doc))


def load_model(path: str | Path) -> ModelInput:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    return parse_model(doc)


def require_noncentral(params: DerivedParams, what: str) -> None:
    if params.case is Case.CENTRAL:
        raise CaseError(f"{what} is undefined in the Central case (m1_tilde = 0)")
