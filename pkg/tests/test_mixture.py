import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from schurmix import mixture as mx
from schurmix.densities import NoncentralBeta, beta_pdf_central, beta_pdf_noncentral
from schurmix.errors import ConvergenceError, DomainError
from schurmix.model import Case, DerivedParams
from schurmix.specfun import SeriesControl

CB = DerivedParams.direct(3, 2.0, 0.0, 2)          # n = 4
NB = DerivedParams.direct(3, 2.0, 1.5, 3)          # n = 5
CENTRAL = DerivedParams.direct(3, 0.0, 0.0, 2)


def _mixing_density(params):
    a, b = params.nu / 2.0, (params.p - 1) / 2.0
    if params.case is Case.NONCENTRAL_BETA:
        d = NoncentralBeta(a, b, params.tau)
        return lambda u: beta_pdf_noncentral(d, u)
    return lambda u: beta_pdf_central(a, b, u)


def _mix_over_u(params, f):
    """``int f(u) h(u) du`` over the mixing law of u."""
    h = _mixing_density(params)
    return integrate.quad(lambda u: f(u) * h(u), 0.0, 1.0, limit=400, epsabs=1e-13, epsrel=1e-12)[0]


class TestWeights:
    def test_lambda_zero(self):
        mix = mx.weights(CENTRAL)
        assert mix.K == 0 and mix.betas.tolist() == [1.0] and mix.tail_mass == 0.0

    def test_readonly(self):
        with pytest.raises(ValueError):
            mx.weights(CB).betas[0] = 0.5

    def test_tau_zero_noncentral_path(self):
        forced = DerivedParams.direct(3, 2.0, 0.0, 2, case=Case.NONCENTRAL_BETA)
        np.testing.assert_allclose(mx.weights(forced).betas, mx.weights(CB).betas, atol=1e-12, rtol=0)

    @pytest.mark.parametrize("params", [CB, NB], ids=["central-beta", "noncentral-beta"])
    def test_quadrature_oracle(self, params):
        betas = mx.weights(params).betas
        x = params.lam / 2.0
        for k in range(21):
            ref = _mix_over_u(params, lambda u: stats.poisson.pmf(k, x * u))
            got = betas[k] if k < betas.size else 0.0
            assert got == pytest.approx(ref, abs=1e-9)

    @pytest.mark.parametrize("params", [CB, NB, DerivedParams.direct(10, 50.0, 20.0, 4)])
    def test_matches_appell_form(self, params):
        mix = mx.weights(params, tol=1e-13)
        for k in range(min(mix.K, 40)):
            assert mix.betas[k] == pytest.approx(mx.weight_phi2(params, k), rel=1e-9, abs=1e-13)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 50), st.integers(2, 6), st.floats(0.0, 100.0), st.floats(0.0, 100.0),
           st.sampled_from([1e-6, 1e-10, 1e-12]))
    def test_normalized_and_nonnegative(self, nu, p, lam, tau, tol):
        mix = mx.weights(DerivedParams.direct(nu, lam, tau, p), tol)
        assert np.all(mix.betas >= 0)
        assert 0.0 <= mix.tail_mass <= tol
        assert mix.total() + mix.tail_mass == pytest.approx(1.0, abs=1e-12)

    def test_bad_tol(self):
        with pytest.raises(DomainError):
            mx.weights(CB, tol=0.0)

    def test_convergence_error(self):
        with pytest.raises(ConvergenceError):
            mx.weights(DerivedParams.direct(3, 100.0, 0.0, 2), ctl=SeriesControl(1e-14, 20))


class TestTransforms:
    @pytest.mark.parametrize("params", [CENTRAL, CB, NB])
    def test_mgf_at_zero(self, params):
        assert mx.mgf(params, 0.0) == pytest.approx(1.0, rel=1e-15)

    def test_mgf_central(self):
        for t in (-2.0, 0.1, 0.3):
            assert mx.mgf(CENTRAL, t) == pytest.approx((1 - 2 * t) ** -1.5, rel=1e-15)

    @pytest.mark.parametrize("params", [CB, NB], ids=["central-beta", "noncentral-beta"])
    @pytest.mark.parametrize("theta", [-0.5, 0.2])
    def test_mgf_quadrature_oracle(self, params, theta):
        # E[exp(theta rho) | u] is the noncentral chi^2 MGF with noncentrality lam u
        nu, lam = params.nu, params.lam
        ref = _mix_over_u(params, lambda u: (1 - 2 * theta) ** (-nu / 2)
                          * math.exp(lam * u * theta / (1 - 2 * theta)))
        assert mx.mgf(params, theta) == pytest.approx(ref, rel=1e-10)

    def test_mgf_domain(self):
        with pytest.raises(DomainError):
            mx.mgf(CB, 0.5)

    @pytest.mark.parametrize("params", [CB, NB])
    def test_pgf_endpoints(self, params):
        # truncated weights may fall short of the exact ones by at most tail_mass
        mix = mx.weights(params)
        assert mx.pgf(params, 1.0) == 1.0
        assert abs(mx.pgf(params, 0.0) - mix.betas[0]) <= mix.tail_mass + 1e-15

    def test_pgf_central(self):
        assert mx.pgf(CENTRAL, 0.3) == 1.0

    @pytest.mark.parametrize("params", [CB, NB])
    def test_pgf_series(self, params):
        betas = mx.weights(params, tol=1e-14).betas
        for s in (-1.0, -0.3, 0.5, 0.9):
            series = float(np.sum(betas * s ** np.arange(betas.size)))
            assert mx.pgf(params, s) == pytest.approx(series, rel=1e-11, abs=1e-13)
            if s >= 0:
                assert betas[0] - 1e-12 <= mx.pgf(params, s) <= 1.0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 20), st.integers(2, 5), st.floats(0.0, 50.0), st.floats(0.0, 20.0),
           st.sampled_from([-1.0, -0.1, 0.1, 0.4]))
    def test_mgf_pgf_identity_relative(self, nu, p, lam, tau, theta):
        pr = DerivedParams.direct(nu, lam, tau, p)
        lhs = mx.mgf(pr, theta)
        rhs = (1 - 2 * theta) ** (-nu / 2) * mx.pgf(pr, 1 / (1 - 2 * theta))
        assert lhs == pytest.approx(rhs, rel=1e-13)

    @pytest.mark.parametrize("params", [CENTRAL, CB, NB])
    def test_mgf_derivative_is_mean(self, params):
        h = 1e-5
        deriv = (mx.mgf(params, h) - mx.mgf(params, -h)) / (2 * h)
        assert deriv == pytest.approx(mx.mean_rho(params), rel=1e-5)


class TestDensity:
    def test_central_is_chi2(self):
        w = np.linspace(0.1, 20, 50)
        np.testing.assert_allclose(mx.pdf_rho(CENTRAL, w), stats.chi2.pdf(w, 3), rtol=1e-13)
        np.testing.assert_allclose(mx.cdf_rho(CENTRAL, w), stats.chi2.cdf(w, 3), rtol=1e-13)

    @pytest.mark.parametrize("params", [CB, NB])
    def test_pdf_quadrature_oracle(self, params):
        ref = _mix_over_u(params, lambda u: stats.ncx2.pdf(2.5, params.nu, params.lam * u)
                          if u > 0 else stats.chi2.pdf(2.5, params.nu))
        assert mx.pdf_rho(params, 2.5) == pytest.approx(ref, rel=1e-8)

    @pytest.mark.parametrize("params", [CB, NB])
    def test_pdf_integrates(self, params):
        val = integrate.quad(lambda w: mx.pdf_rho(params, w), 0, np.inf, limit=400)[0]
        assert val == pytest.approx(1.0, abs=1e-6)

    def test_cdf_examples(self):
        assert mx.cdf_rho(CB, 0.0) == 0.0
        ref = integrate.quad(lambda w: mx.pdf_rho(CB, w), 0.0, 3.0, epsabs=1e-13, epsrel=1e-12)[0]
        assert mx.cdf_rho(CB, 3.0) == pytest.approx(ref, rel=1e-9)

    def test_cdf_interval(self):
        lo, hi = mx.cdf_rho_interval(NB, np.array([1.0, 5.0, 100.0]), tol=1e-4)
        mix = mx.weights(NB, tol=1e-4)
        np.testing.assert_allclose(hi - lo, np.minimum(lo + mix.tail_mass, 1.0) - lo)
        assert np.all(np.diff(lo) >= 0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 30), st.integers(2, 5), st.floats(0.0, 60.0), st.floats(0.0, 30.0),
           st.lists(st.floats(1e-6, 200.0), min_size=1, max_size=30))
    def test_pdf_nonnegative_cdf_monotone(self, nu, p, lam, tau, ws):
        pr = DerivedParams.direct(nu, lam, tau, p)
        law = mx.RhoLaw(pr)
        ws = np.sort(np.asarray(ws))
        assert np.all(law.pdf(ws) >= 0)
        assert np.all(np.diff(law.cdf(ws)) >= -1e-15)

    def test_truncation_bound(self):
        tol = 1e-3
        pr = DerivedParams.direct(3, 40.0, 5.0, 3)
        coarse = mx.RhoLaw(pr, tol=tol)
        fine = mx.RhoLaw(pr, tol=1e-14)
        w = np.linspace(0.01, 150, 800)
        assert np.all(np.abs(coarse.pdf(w) - fine.pdf(w)) <= coarse.pdf_bound(w) + 1e-15)
        assert np.all(coarse.pdf_bound(w) <= tol * 0.5)

    def test_domain(self):
        with pytest.raises(DomainError):
            mx.pdf_rho(CB, 0.0)
        with pytest.raises(DomainError):
            mx.cdf_rho(CB, -1.0)

    def test_unscaled(self):
        pr = DerivedParams(nu=2, p=2, sigma112=2.0, m1_tilde=(0.0, 0.0, 0.0), lam=0.0, tau=0.0,
                           case=Case.CENTRAL)
        assert mx.pdf_w11dot2(pr, 2.0) == pytest.approx(math.exp(-0.5) / 4, rel=1e-14)
        assert mx.cdf_w11dot2(pr, 2.0) == pytest.approx(stats.chi2.cdf(1.0, 2), rel=1e-14)
        assert mx.pdf_w11dot2(CB, 2.0) == mx.pdf_rho(CB, 2.0)
        scaled = DerivedParams(nu=3, p=2, sigma112=2.5, m1_tilde=CB.m1_tilde, lam=2.0, tau=0.0,
                               case=Case.CENTRAL_BETA)
        val = integrate.quad(lambda w: mx.pdf_w11dot2(scaled, w), 0, np.inf, limit=400)[0]
        assert val == pytest.approx(1.0, abs=1e-6)


class TestMean:
    def test_examples(self):
        assert mx.mean_rho(CENTRAL) == 3.0
        assert mx.mean_rho(CB) == pytest.approx(4.5, rel=1e-14)

    def test_central_beta_by_quadrature(self):
        ref = _mix_over_u(CB, lambda u: CB.nu + CB.lam * u)
        assert ref == pytest.approx(4.5, rel=1e-10)

    def test_noncentral_poisson_series(self):
        # E[u] = sum_l pi_l a / (a + b + l) for Beta(a, b + l) components
        a, b, z = NB.nu / 2, (NB.p - 1) / 2, NB.tau / 2
        l = np.arange(200)
        eu = float(np.sum(stats.poisson.pmf(l, z) * a / (a + b + l)))
        assert mx.mean_rho(NB) == pytest.approx(NB.nu + NB.lam * eu, rel=1e-10)

    def test_tau_to_zero(self):
        near = DerivedParams.direct(3, 2.0, 1e-12, 2)
        assert mx.mean_rho(near) == pytest.approx(mx.mean_rho(CB), abs=1e-8)


def test_weights_shared_across_threads():
    from concurrent.futures import ThreadPoolExecutor

    law = mx.RhoLaw(NB)
    w = np.linspace(0.1, 20, 100)
    with ThreadPoolExecutor(4) as pool:
        outs = list(pool.map(lambda _: law.pdf(w), range(8)))
    for o in outs:
        np.testing.assert_array_equal(o, outs[0])


def test_log_space_large_parameters():
    pr = DerivedParams.direct(50, 100.0, 100.0, 6)
    mix = mx.weights(pr)
    assert np.all(np.isfinite(mix.betas)) and mix.tail_mass <= 1e-10
    assert math.isfinite(mx.mgf(pr, 0.4)) and math.isfinite(mx.pgf(pr, 0.0))
    assert special.logsumexp(np.log(mix.betas[mix.betas > 0])) == pytest.approx(0.0, abs=1e-10)
