import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate, stats

from schurmix.densities import (
    NoncentralBeta,
    NoncentralChi2,
    beta_cdf_central,
    beta_cdf_noncentral,
    beta_pdf_central,
    beta_pdf_noncentral,
    chi2_cdf,
    chi2_pdf,
    noncentral_chi2_cdf,
    noncentral_chi2_pdf,
    poisson_truncation,
)
from schurmix.errors import DomainError
from schurmix.specfun import SeriesControl

W_GRID = np.linspace(0.05, 30.0, 200)
U_GRID = np.linspace(0.01, 0.99, 99)


def _quad(f, a, b, **kw):
    return integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-12, **kw)[0]


class TestTypes:
    def test_noncentral_chi2(self):
        assert NoncentralChi2(3, 1.5).mean == 4.5
        with pytest.raises(DomainError):
            NoncentralChi2(0, 1.0)
        with pytest.raises(DomainError):
            NoncentralChi2(2, -0.1)

    def test_noncentral_beta(self):
        with pytest.raises(DomainError):
            NoncentralBeta(0.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            NoncentralBeta(1.0, 1.0, -1.0)


class TestChi2:
    def test_pdf_examples(self):
        assert chi2_pdf(2, 2.0) == pytest.approx(math.exp(-1) / 2, rel=1e-14)
        assert chi2_pdf(1, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-14)
        assert chi2_pdf(4, 2.0) == pytest.approx(math.exp(-1) / 2, rel=1e-14)

    def test_pdf_domain(self):
        with pytest.raises(DomainError):
            chi2_pdf(3, 0.0)
        with pytest.raises(DomainError):
            chi2_pdf(0, 1.0)

    def test_pdf_matches_scipy(self):
        for m in (1, 2, 5, 40):
            np.testing.assert_allclose(chi2_pdf(m, W_GRID), stats.chi2.pdf(W_GRID, m), rtol=1e-12)

    def test_cdf_examples(self):
        assert chi2_cdf(4, 0.0) == 0.0
        assert chi2_cdf(2, 2 * math.log(2)) == pytest.approx(0.5, rel=1e-14)
        ref = _quad(lambda w: chi2_pdf(5, w), 0.0, 4.0)
        assert chi2_cdf(5, 4.0) == pytest.approx(ref, rel=1e-10)
        assert chi2_cdf(5, 4.0) == pytest.approx(0.4506, abs=1e-4)

    def test_vector_shape(self):
        out = chi2_pdf(3, np.ones((2, 3)))
        assert out.shape == (2, 3)
        assert isinstance(chi2_pdf(3, 1.0), float)


class TestNoncentralChi2:
    def test_zero_delta(self):
        d = NoncentralChi2(3, 0.0)
        np.testing.assert_allclose(noncentral_chi2_pdf(d, W_GRID), chi2_pdf(3, W_GRID), rtol=1e-14, atol=0)
        np.testing.assert_allclose(noncentral_chi2_cdf(d, W_GRID), chi2_cdf(3, W_GRID), rtol=1e-14, atol=0)

    def test_derived_value(self):
        with mp.workdps(40):
            # Poisson(1/2) weights times g_{2+2k}(1) = e^{-1/2} / (2^{k+1} k!)
            ref = mp.nsum(lambda k: mp.mpf(0.5) ** k / mp.factorial(k) * mp.e ** (-0.5)
                          * mp.e ** (-0.5) / (2 ** (k + 1) * mp.factorial(k)), [0, mp.inf])
        assert noncentral_chi2_pdf(NoncentralChi2(2, 1.0), 1.0) == pytest.approx(float(ref), rel=1e-13)
        assert noncentral_chi2_pdf(NoncentralChi2(2, 1.0), 1.0) == pytest.approx(
            stats.ncx2.pdf(1.0, 2, 1.0), rel=1e-10)

    def test_pdf_integrates_to_one(self):
        d = NoncentralChi2(2, 1.0)
        assert _quad(lambda w: noncentral_chi2_pdf(d, w), 0.0, np.inf) == pytest.approx(1.0, abs=1e-8)

    def test_cdf_examples(self):
        d = NoncentralChi2(2, 1.0)
        assert noncentral_chi2_cdf(d, 0.0) == 0.0
        ref = _quad(lambda w: noncentral_chi2_pdf(d, w), 0.0, 3.0)
        assert noncentral_chi2_cdf(d, 3.0) == pytest.approx(ref, rel=1e-10)

    @pytest.mark.parametrize("nu,delta", [(1, 0.0), (3, 2.0), (10, 50.0)])
    def test_cdf_monotone_and_tends_to_one(self, nu, delta):
        d = NoncentralChi2(nu, delta)
        vals = noncentral_chi2_cdf(d, np.linspace(0, 3 * (nu + delta), 300))
        assert np.all(np.diff(vals) >= 0)
        far = nu + delta + 40 * math.sqrt(2 * nu + 4 * delta)
        assert noncentral_chi2_cdf(d, far) >= 1 - 1e-6

    @pytest.mark.parametrize("nu,delta", [(2, 1.0), (5, 7.5)])
    def test_mean(self, nu, delta):
        d = NoncentralChi2(nu, delta)
        m = _quad(lambda w: w * noncentral_chi2_pdf(d, w), 0.0, np.inf)
        assert m == pytest.approx(d.mean, abs=1e-6)

    def test_poisson_truncation(self):
        ctl = SeriesControl(1e-12)
        K = poisson_truncation(3.0, ctl)
        assert stats.poisson.sf(K, 3.0) <= 1e-12 < stats.poisson.sf(K - 1, 3.0)
        assert poisson_truncation(0.0) == 0


class TestBeta:
    def test_central_examples(self):
        assert beta_pdf_central(1, 1, 0.3) == pytest.approx(1.0, rel=1e-14)
        assert beta_pdf_central(1, 0.5, 0.75) == pytest.approx(1.0, rel=1e-14)
        u = 0.2
        assert beta_pdf_central(1, 0.5, u) == pytest.approx(0.5 * (1 - u) ** -0.5, rel=1e-14)

    def test_central_integrates(self):
        val = integrate.quad(lambda u: beta_pdf_central(2.5, 0.5, u), 0, 1, limit=200,
                             epsabs=1e-12, epsrel=1e-11)[0]
        assert val == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("u", [0.0, 1.0, -0.1, 1.5])
    def test_open_interval(self, u):
        with pytest.raises(DomainError):
            beta_pdf_central(1.0, 1.0, u)
        with pytest.raises(DomainError):
            beta_pdf_noncentral(NoncentralBeta(1.0, 1.0, 1.0), u)

    def test_noncentral_zero_tau(self):
        d = NoncentralBeta(1.5, 0.5, 0.0)
        np.testing.assert_allclose(beta_pdf_noncentral(d, U_GRID), beta_pdf_central(1.5, 0.5, U_GRID),
                                   rtol=1e-14, atol=0)

    def test_noncentral_derived_value(self):
        with mp.workdps(40):
            a, b, z, u = mp.mpf(1.5), mp.mpf(0.5), mp.mpf(1), mp.mpf(0.5)
            ref = mp.nsum(lambda l: z ** l / mp.factorial(l) * mp.e ** (-z)
                          * u ** (a - 1) * (1 - u) ** (b + l - 1) / mp.beta(a, b + l), [0, mp.inf])
        got = beta_pdf_noncentral(NoncentralBeta(1.5, 0.5, 2.0), 0.5)
        assert got == pytest.approx(float(ref), rel=1e-13)

    def test_noncentral_integrates(self):
        d = NoncentralBeta(1.5, 0.5, 2.0)
        val = integrate.quad(lambda u: beta_pdf_noncentral(d, u), 0, 1, limit=200,
                             epsabs=1e-12, epsrel=1e-12)[0]
        assert val == pytest.approx(1.0, abs=1e-8)

    def test_noncentral_cdf_matches_quadrature(self):
        d = NoncentralBeta(1.5, 1.0, 1.5)
        for u in (0.1, 0.5, 0.9):
            ref = integrate.quad(lambda t: beta_pdf_noncentral(d, t), 0, u, limit=200,
                                 epsabs=1e-13, epsrel=1e-12)[0]
            assert beta_cdf_noncentral(d, u) == pytest.approx(ref, rel=1e-9)
        assert beta_cdf_noncentral(d, 0.0) == 0.0
        assert beta_cdf_noncentral(d, 1.0) == pytest.approx(1.0, abs=1e-13)

    def test_central_cdf(self):
        np.testing.assert_allclose(beta_cdf_central(1.5, 0.5, U_GRID), stats.beta.cdf(U_GRID, 1.5, 0.5),
                                   rtol=1e-12)

    def test_nonnegative(self):
        d = NoncentralBeta(0.5, 0.5, 20.0)
        assert np.all(beta_pdf_noncentral(d, U_GRID) >= 0)
