import numpy as np
import numpy.testing as npt
import pytest
from scipy import stats

from skewfit.exceptions import IndefiniteCurvatureError, UnsupportedModelError
from skewfit.battery import (
    conjugate_gaussian_glm,
    logistic_1d_glm,
    poisson_1d_glm,
    probit_2d_glm,
)
from skewfit.symmetric import (
    EpOptions,
    GaussianApproximation,
    GvbOptions,
    SnpApproximation,
    approx_from_dict,
    approx_to_dict,
    build_snp,
    fit_gep,
    fit_gvb,
    fit_laplace,
    gaussian_expect_poly,
)

# MAP of the single-count Poisson model (y=3, x=1, N(0,4) prior):
# the root of 3 - e^t - t/4, and the Laplace sd 1/sqrt(e^t + 1/4) there.
POISSON_MAP = 1.0106337404425347
POISSON_LAPLACE_SD = 0.5776062473653281

# conjugate-Gaussian battery model (seed 7, d=1): closed-form posterior
CONJ_MEAN = 0.33913614965928596
CONJ_VAR = 0.07221742367379222


def test_gaussian_logpdf_matches_scipy():
    mean = np.array([0.5, -1.0])
    cov = np.array([[1.2, 0.3], [0.3, 0.9]])
    g = GaussianApproximation(mean, cov)
    pts = np.random.default_rng(0).standard_normal((50, 2))
    npt.assert_allclose(
        g.log_pdf(pts), stats.multivariate_normal(mean, cov).logpdf(pts), rtol=1e-12
    )


def test_gaussian_draw_moments():
    g = GaussianApproximation(np.array([1.0]), np.array([[2.0]]))
    draws = g.draw(np.random.default_rng(1), 200_000)
    assert abs(draws.mean() - 1.0) < 0.02
    assert abs(draws.var() - 2.0) < 0.05


def test_gaussian_rejects_indefinite_cov():
    with pytest.raises(IndefiniteCurvatureError):
        GaussianApproximation(np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_laplace_poisson_matches_root():
    g = poisson_1d_glm()
    lap = fit_laplace(g.as_spec(), np.zeros(1))
    npt.assert_allclose(lap.center[0], POISSON_MAP, atol=1e-8)
    npt.assert_allclose(np.sqrt(lap.cov[0, 0]), POISSON_LAPLACE_SD, rtol=1e-8)


def test_laplace_exact_on_conjugate_gaussian():
    g = conjugate_gaussian_glm(1)
    lap = fit_laplace(g.as_spec(), np.zeros(1))
    npt.assert_allclose(lap.center[0], CONJ_MEAN, atol=1e-8)
    npt.assert_allclose(lap.cov[0, 0], CONJ_VAR, rtol=1e-8)


def test_gvb_recovers_conjugate_posterior():
    g = conjugate_gaussian_glm(1)
    fit = fit_gvb(g.as_spec(), opts=GvbOptions(n_iter=3000, seed=0))
    assert abs(fit.center[0] - CONJ_MEAN) < 0.02
    assert abs(fit.cov[0, 0] - CONJ_VAR) < 0.02
    assert fit.elbo_trace.shape == (3000,)


def test_gvb_is_deterministic():
    g = logistic_1d_glm()
    opts = GvbOptions(n_iter=500, seed=9)
    a = fit_gvb(g.as_spec(), opts=opts)
    b = fit_gvb(g.as_spec(), opts=opts)
    npt.assert_array_equal(a.center, b.center)
    npt.assert_array_equal(a.cov, b.cov)


def test_gep_exact_on_gaussian_likelihood():
    # with gaussian sites EP moment matching is exact: one sweep suffices
    g = conjugate_gaussian_glm(2)
    fit = fit_gep(g)
    X, y = g.design, g.response
    prec = X.T @ X + np.diag(1.0 / g.prior_cov_diag)
    cov = np.linalg.inv(prec)
    mean = cov @ (X.T @ y)
    npt.assert_allclose(fit.center, mean, atol=1e-6)
    npt.assert_allclose(fit.cov, cov, atol=1e-6)


def test_gep_probit_close_to_laplace():
    g = probit_2d_glm()
    fit = fit_gep(g, EpOptions())
    lap = fit_laplace(g.as_spec(), np.zeros(2))
    # EP and Laplace agree to first order on this easy posterior
    npt.assert_allclose(fit.center, lap.center, atol=0.1)
    npt.assert_allclose(fit.cov, lap.cov, atol=0.1)
    assert fit.sites.site_precisions.shape == (g.n,)


def test_gaussian_expect_poly_even_moments():
    sigma = np.array([[0.7]])
    # E[h^4] = 3 sigma^4, E[h^6] = 15 sigma^6, E[h^8] = 105 sigma^8
    one = np.ones
    npt.assert_allclose(gaussian_expect_poly(one((1,) * 4), sigma), 3 * 0.7**2)
    npt.assert_allclose(gaussian_expect_poly(one((1,) * 6), sigma), 15 * 0.7**3)
    npt.assert_allclose(gaussian_expect_poly(one((1,) * 8), sigma), 105 * 0.7**4)
    assert gaussian_expect_poly(one((1,) * 3), sigma) == 0.0


def test_snp_normalizer_closed_form():
    # 1 + l4*3*s^2/24 + l4^2*105*s^4/(2*576) + l3^2*15*s^3/(2*36), s = 0.7
    snp = SnpApproximation(
        np.zeros(1), np.array([[1 / 0.7]]),
        np.full((1, 1, 1), 0.9), np.full((1, 1, 1, 1), -1.3),
    )
    npt.assert_allclose(snp.poly_normalizer, 1.0152404036458331, rtol=1e-12)


def test_snp_density_is_even_and_normalized():
    g = poisson_1d_glm()
    lap = fit_laplace(g.as_spec(), np.zeros(1))
    snp = build_snp(g.as_spec(), lap)
    h = np.linspace(-3, 3, 101)[:, None]
    npt.assert_allclose(
        snp.log_pdf(snp.center + h), snp.log_pdf(snp.center - h), atol=1e-10
    )
    x = snp.center[0] + np.linspace(-8, 8, 4001)
    pdf = np.exp(snp.log_pdf(x[:, None]))
    npt.assert_allclose(np.trapezoid(pdf, x), 1.0, atol=1e-6)


def test_snp_sampler_matches_density():
    g = poisson_1d_glm()
    lap = fit_laplace(g.as_spec(), np.zeros(1))
    snp = build_snp(g.as_spec(), lap)
    draws = snp.draw(np.random.default_rng(2), 50_000)[:, 0]
    x = snp.center[0] + np.linspace(-8, 8, 4001)
    pdf = np.exp(snp.log_pdf(x[:, None]))
    cdf = np.concatenate([[0], np.cumsum((pdf[1:] + pdf[:-1]) / 2 * np.diff(x))])
    cdf /= cdf[-1]
    ks = stats.ks_1samp(draws, lambda v: np.interp(v, x, cdf))
    assert ks.pvalue > 0.01


def test_snp_refuses_high_dimension():
    with pytest.raises(UnsupportedModelError):
        SnpApproximation(np.zeros(3), np.eye(3), np.zeros((3,) * 3), np.zeros((3,) * 4))


def test_serialization_roundtrip():
    g = poisson_1d_glm()
    lap = fit_laplace(g.as_spec(), np.zeros(1))
    for approx in (lap, build_snp(g.as_spec(), lap)):
        back = approx_from_dict(approx_to_dict(approx))
        pts = np.linspace(-2, 3, 20)[:, None]
        npt.assert_allclose(back.log_pdf(pts), approx.log_pdf(pts), rtol=1e-12)
