"""Monte Carlo oracle for the Schur complement law.

Draws ``X = M + Z L'`` with ``Z`` standard normal and ``L`` the Cholesky
factor of ``Sigma``, then records per draw the Schur complement ``w11dot2``,
its scaled version ``rho`` and the mixing statistic ``u``.

Reproducibility: the sample index range is cut into fixed blocks of
``BLOCK`` draws.  Block ``j`` gets its own Philox stream keyed by
``SeedSequence(seed, spawn_key=(j,))``, so the output depends only on
``(seed, samples)``; the worker count only decides how blocks are shared
out.  Normal variates come from numpy's ``Generator.standard_normal``
(ziggurat), fixed for a given numpy release.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import DomainError, SingularityError
from .model import Case, DerivedParams, GaussianMatrixSpec, derive_params, require_noncentral

__all__ = [
    "BLOCK",
    "SchurSample",
    "SimConfig",
    "SampleSet",
    "sample_matrix",
    "schur_of",
    "schur_projection",
    "u_of",
    "u_hotelling",
    "run_sim",
    "ks_statistic",
    "ks_critical",
    "empirical_mgf",
]

BLOCK = 8192
U_CLAMP_SLACK = 1e-12


@dataclass(frozen=True)
class SchurSample:
    w11dot2: float
    rho: float
    u: float


@dataclass(frozen=True)
class SimConfig:
    samples: int
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < 1:
            raise DomainError(f"samples must be a positive integer, got {self.samples}")
        if not 0 <= self.seed < 2**64:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise DomainError(f"workers must be a positive integer, got {self.workers}")


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


def sample_matrix(spec: GaussianMatrixSpec, rng: np.random.Generator) -> np.ndarray:
    """One draw of ``X``: independent rows with means from ``M`` and covariance ``Sigma``."""
    Z = rng.standard_normal((spec.n, spec.p))
    return spec.M + Z @ spec.factor.lower.T


def _gram_parts(X: np.ndarray):
    x1 = X[..., 0]
    X2 = X[..., 1:]
    W22 = np.einsum("...ij,...ik->...jk", X2, X2)
    w21 = np.einsum("...ij,...i->...j", X2, x1)
    w11 = np.einsum("...i,...i->...", x1, x1)
    return X2, W22, w21, w11


def _batch_cholesky(W22: np.ndarray):
    """Cholesky of a stack; failing entries get an identity stand-in and are flagged."""
    try:
        return np.linalg.cholesky(W22), np.ones(W22.shape[0], dtype=bool)
    except np.linalg.LinAlgError:
        pass
    L = np.empty_like(W22)
    ok = np.ones(W22.shape[0], dtype=bool)
    eye = np.eye(W22.shape[-1])
    for i in range(W22.shape[0]):
        try:
            L[i] = np.linalg.cholesky(W22[i])
        except np.linalg.LinAlgError:
            L[i] = eye
            ok[i] = False
    return L, ok


def _lower_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.solve(L, b[..., None])[..., 0]


def _spd_solve(L: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.solve(np.swapaxes(L, -1, -2), np.linalg.solve(L, b[..., None]))[..., 0]


def _bordered(x1, X2, L, w21):
    """``w11 - w21' W22^{-1} w21`` from the Cholesky factor ``L`` of ``W22``.

    The coefficient ``beta = W22^{-1} w21`` gets one step of iterative
    refinement and the complement is returned as ``r'r`` with
    ``r = x1 - X2 beta``.  This equals ``w11 - w21' beta`` exactly when
    ``W22 beta = w21`` but avoids the cancellation of that subtraction when
    ``x1`` lies close to the span of ``X2``.
    """
    beta = _spd_solve(L, w21)
    r = x1 - np.einsum("...ij,...j->...i", X2, beta)
    beta = beta + _spd_solve(L, np.einsum("...ij,...i->...j", X2, r))
    r = x1 - np.einsum("...ij,...j->...i", X2, beta)
    return np.einsum("...i,...i->...", r, r)


def _batch_schur(X: np.ndarray, m1_tilde: np.ndarray | None):
    """Bordered-form Schur complements and projection statistics for a stack."""
    X2, W22, w21, _ = _gram_parts(X)
    L, ok = _batch_cholesky(W22)
    w112 = _bordered(X[..., 0], X2, L, w21)
    ok &= w112 > 0
    if m1_tilde is None:
        u = np.full(w112.shape, np.nan)
    else:
        g = np.einsum("...ij,i->...j", X2, m1_tilde)
        v = _lower_solve(L, g)
        u = 1.0 - np.einsum("...j,...j->...", v, v) / float(m1_tilde @ m1_tilde)
    return w112, u, ok


def schur_of(X) -> float:
    """``w11 - w21' W22^{-1} w21`` for ``W = X'X``, via a Cholesky solve on ``W22``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] < 2:
        raise DomainError(f"expected an n x p matrix with p >= 2, got shape {X.shape}")
    X2, W22, w21, _ = _gram_parts(X)
    try:
        L = np.linalg.cholesky(W22)
    except np.linalg.LinAlgError as exc:
        raise SingularityError("X2'X2 is singular") from exc
    return float(_bordered(X[:, 0], X2, L, w21))


def schur_projection(X) -> float:
    """``x1' Q2 x1`` with ``Q2`` the projector off the span of ``X2`` (QR based)."""
    X = np.asarray(X, dtype=float)
    H, _ = np.linalg.qr(X[:, 1:])
    x1 = X[:, 0]
    r = x1 - H @ (H.T @ x1)
    return float(r @ r)


def u_of(X, params: DerivedParams) -> float:
    """Normalised residual of ``m1_tilde`` off the column space of ``X2``, clamped to [0, 1]."""
    require_noncentral(params, "u")
    X = np.asarray(X, dtype=float)
    m = np.asarray(params.m1_tilde, dtype=float)
    H, _ = np.linalg.qr(X[:, 1:])
    r = m - H @ (H.T @ m)
    return min(1.0, max(0.0, float(r @ r / (m @ m))))


def u_hotelling(X) -> float:
    """``1 / (1 + T^2)`` with ``T^2 = x12' (X22' X22)^{-1} x12``.

    Equals ``u`` when ``m1_tilde`` is proportional to the first basis
    vector, as in the canonical model.
    """
    X = np.asarray(X, dtype=float)
    x12 = X[0, 1:]
    X22 = X[1:, 1:]
    t2 = float(x12 @ np.linalg.solve(X22.T @ X22, x12))
    return 1.0 / (1.0 + t2)


@dataclass(frozen=True)
class SampleSet:
    """Simulation output in canonical (global index) order."""

    w11dot2: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    rejected: int
    seed: int
    spec_hash: str
    case: Case

    def __len__(self) -> int:
        return self.rho.size

    def __getitem__(self, i: int) -> SchurSample:
        return SchurSample(float(self.w11dot2[i]), float(self.rho[i]), float(self.u[i]))

    def __iter__(self) -> Iterator[SchurSample]:
        return (self[i] for i in range(len(self)))

    def metadata(self) -> dict:
        return {"kind": "samples", "seed": self.seed, "samples": len(self),
                "spec_hash": self.spec_hash, "rejected": self.rejected, "case": self.case.value}

    def to_csv(self, out) -> None:
        """CSV ``index,w11dot2,rho,u`` with a trailing ``#``-prefixed JSON metadata line.

        ``u`` is left empty in the Central case, where it is undefined.
        """
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["index", "w11dot2", "rho", "u"])
        for i in range(len(self)):
            u = float(self.u[i])
            writer.writerow([i, repr(float(self.w11dot2[i])), repr(float(self.rho[i])),
                             "" if math.isnan(u) else repr(u)])
        out.write("# " + json.dumps(self.metadata(), sort_keys=True) + "\n")

    def to_json(self) -> dict:
        rows = []
        for i in range(len(self)):
            u = float(self.u[i])
            rows.append({"index": i, "w11dot2": float(self.w11dot2[i]), "rho": float(self.rho[i]),
                         "u": None if math.isnan(u) else u})
        return {"metadata": self.metadata(), "samples": rows}

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def _run_block(spec: GaussianMatrixSpec, m1: np.ndarray | None, seed: int, block: int, size: int):
    rng = _block_rng(seed, block)
    L = spec.factor.lower
    X = spec.M + rng.standard_normal((size, spec.n, spec.p)) @ L.T
    w112, u, ok = _batch_schur(X, m1)
    rejected = 0
    for i in np.nonzero(~ok)[0]:
        # redraw from the same block stream until the draw is usable
        while True:
            rejected += 1
            Xi = sample_matrix(spec, rng)
            wi, ui, oki = _batch_schur(Xi[None], m1)
            if oki[0]:
                w112[i], u[i] = wi[0], ui[0]
                break
    return w112, u, rejected


def run_sim(spec: GaussianMatrixSpec, cfg: SimConfig, params: DerivedParams | None = None) -> SampleSet:
    """Simulate ``cfg.samples`` draws.

    ``params`` defaults to :func:`derive_params` of ``spec``; it supplies
    ``sigma112`` and the direction ``m1_tilde`` used for ``u``.
    """
    if params is None:
        params = derive_params(spec)
    m1 = None if params.case is Case.CENTRAL else np.asarray(params.m1_tilde, dtype=float)
    nblocks = -(-cfg.samples // BLOCK)
    sizes = [min(BLOCK, cfg.samples - j * BLOCK) for j in range(nblocks)]

    def job(j):
        return _run_block(spec, m1, cfg.seed, j, sizes[j])

    if cfg.workers == 1 or nblocks == 1:
        parts = [job(j) for j in range(nblocks)]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            parts = list(pool.map(job, range(nblocks)))
    w112 = np.concatenate([p[0] for p in parts])
    u = np.concatenate([p[1] for p in parts])
    if m1 is not None:
        u = np.clip(u, 0.0, 1.0)
    rho = w112 / params.sigma112
    for arr in (w112, rho, u):
        arr.setflags(write=False)
    return SampleSet(w112, rho, u, sum(p[2] for p in parts), cfg.seed, spec.digest(), params.case)


def ks_statistic(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of ``samples`` and ``cdf``.

    ``cdf`` is called once on the sorted sample array.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    N = x.size
    if N == 0:
        raise DomainError("ks_statistic needs at least one sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, N + 1)
    return float(max(np.max(np.abs(i / N - F)), np.max(np.abs((i - 1) / N - F))))


def ks_critical(N: int, alpha: float = 0.01) -> float:
    """Asymptotic critical value ``c(alpha) / sqrt(N)``, ``c(alpha) = sqrt(-ln(alpha/2) / 2)``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(-math.log(alpha / 2.0) / 2.0) / math.sqrt(N)


def empirical_mgf(samples, theta: float) -> tuple[float, float]:
    """Sample mean of ``exp(theta * rho)`` and its standard error."""
    if not theta < 0.5:
        raise DomainError(f"theta must be < 1/2, got {theta}")
    vals = np.exp(theta * np.asarray(samples, dtype=float))
    if vals.size < 2:
        return float(vals.mean()), 0.0
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size))
