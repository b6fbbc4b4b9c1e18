"""Analytic-versus-simulation validation battery behind ``schurmix validate``."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from . import densities
from .mixture import DEFAULT_TOL, RhoLaw
from .model import Case, ModelInput
from .montecarlo import SimConfig, empirical_mgf, ks_critical, ks_statistic, run_sim
from .specfun import DEFAULT_CONTROL, SeriesControl

MGF_THETAS = (-0.5, 0.1, 0.2)
IDENTITY_THETAS = (-1.0, -0.1, 0.1, 0.4)
IDENTITY_TOL = 1e-10
NORMALIZATION_TOL = 1e-12
MGF_SE = 3.0
MEAN_SE = 4.0


@dataclass
class Check:
    name: str
    passed: bool
    statistic: float
    threshold: float
    detail: str = ""

    def to_json(self) -> dict:
        return asdict(self)


def mixing_cdf(model: ModelInput, ctl: SeriesControl = DEFAULT_CONTROL):
    """CDF of the law the analytic side assigns to ``u``."""
    p = model.params
    law = densities.NoncentralBeta(p.nu / 2.0, (p.p - 1) / 2.0,
                                   p.tau if p.case is Case.NONCENTRAL_BETA else 0.0)
    return lambda u: densities.beta_cdf_noncentral(law, u, ctl)


def identity_gap(law: RhoLaw, thetas=IDENTITY_THETAS) -> float:
    """Largest ``|M(theta) - (1-2 theta)^{-nu/2} G(1/(1-2 theta))|``."""
    nu = law.params.nu
    gaps = []
    for t in thetas:
        lhs = law.mgf(t)
        rhs = (1.0 - 2.0 * t) ** (-nu / 2.0) * law.pgf(1.0 / (1.0 - 2.0 * t))
        gaps.append(abs(lhs - rhs))
    return max(gaps)


def validate(model: ModelInput, samples: int = 200_000, seed: int = 42, alpha: float = 0.01,
             workers: int = 1, tol: float = DEFAULT_TOL,
             ctl: SeriesControl = DEFAULT_CONTROL) -> dict:
    params = model.params
    law = RhoLaw(params, tol, ctl)
    sims = run_sim(model.gaussian, SimConfig(samples, seed, workers))
    crit = ks_critical(samples, alpha)
    checks: list[Check] = []

    total = law.mix.total() + law.mix.tail_mass
    checks.append(Check("weight_normalization",
                        abs(total - 1.0) <= NORMALIZATION_TOL and law.mix.tail_mass <= tol,
                        abs(total - 1.0), NORMALIZATION_TOL,
                        f"tail_mass={law.mix.tail_mass!r} K={law.mix.K}"))

    gap = identity_gap(law)
    checks.append(Check("mgf_pgf_identity", gap <= IDENTITY_TOL, gap, IDENTITY_TOL))

    d_rho = ks_statistic(sims.rho, law.cdf)
    checks.append(Check("ks_rho", d_rho < crit, d_rho, crit))

    if params.case is Case.CENTRAL or sims.case is Case.CENTRAL:
        checks.append(Check("ks_u", True, 0.0, crit, "skipped: u undefined when m1_tilde = 0"))
    else:
        d_u = ks_statistic(sims.u, mixing_cdf(model, ctl))
        checks.append(Check("ks_u", d_u < crit, d_u, crit))

    mean = float(sims.rho.mean())
    se = float(sims.rho.std(ddof=1) / math.sqrt(samples))
    target = law.mean()
    z = abs(mean - target) / se if se > 0 else math.inf
    checks.append(Check("mean_rho", z <= MEAN_SE, z, MEAN_SE, f"empirical={mean!r} analytic={target!r}"))

    for t in MGF_THETAS:
        est, err = empirical_mgf(sims.rho, t)
        exact = law.mgf(t)
        z = abs(est - exact) / err if err > 0 else math.inf
        checks.append(Check(f"mgf_theta_{t:g}", z <= MGF_SE, z, MGF_SE,
                            f"empirical={est!r} analytic={exact!r}"))

    return {
        "kind": "validation",
        "passed": all(c.passed for c in checks),
        "failed": [c.name for c in checks if not c.passed],
        "checks": [c.to_json() for c in checks],
        "params": params.to_json(),
        "metadata": {"samples": samples, "seed": seed, "alpha": alpha, "tol": tol,
                     "rel_tol": ctl.rel_tol, "max_terms": ctl.max_terms,
                     "spec_hash": sims.spec_hash, "rejected": sims.rejected},
    }

